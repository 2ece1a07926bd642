"""Parameter update rules: Adam and plain SGD, optional L2 weight decay."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
DEFAULT_LEARNING_RATE = 1e-3


class Optimizer:
    """Updates a fixed list of parameter arrays in place.

    ``decay_mask`` selects which entries receive L2 weight decay: one
    element per parameter array, each either a bool or a 0/1 array of the
    same shape (weights yes, biases no). When omitted, decay applies
    everywhere.
    """

    def __init__(self, lr: float, weight_decay: float = 0.0, decay_mask: Optional[Sequence] = None):
        self.lr = lr
        self.weight_decay = weight_decay
        self.decay_mask = list(decay_mask) if decay_mask is not None else None
        self.step_count = 0

    def _decayed(self, i: int, param: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if not self.weight_decay:
            return grad
        mask = True if self.decay_mask is None else self.decay_mask[i]
        if mask is False:
            return grad
        if mask is True:
            return grad + self.weight_decay * param
        return grad + self.weight_decay * (param * mask)

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]):
        raise NotImplementedError


class SGD(Optimizer):
    def step(self, params, grads):
        self.step_count += 1
        for i, (p, g) in enumerate(zip(params, grads)):
            p -= self.lr * self._decayed(i, p, g)


class Adam(Optimizer):
    def __init__(self, lr: float = DEFAULT_LEARNING_RATE, weight_decay: float = 0.0,
                 decay_mask: Optional[Sequence[bool]] = None,
                 beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2, eps: float = ADAM_EPS):
        super().__init__(lr, weight_decay, decay_mask)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: list = []
        self.v: list = []

    def step(self, params, grads):
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
            self._scratch = [np.empty_like(p) for p in params]
        if len(params) != len(self.m):
            raise ValueError("parameter list changed between optimizer steps")
        self.step_count += 1
        t = self.step_count
        bias1 = 1.0 - self.beta1**t
        bias2 = 1.0 - self.beta2**t
        for i, (p, g) in enumerate(zip(params, grads)):
            g = self._decayed(i, p, g)
            m, v, s = self.m[i], self.v[i], self._scratch[i]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            np.multiply(g, g, out=s)
            s *= 1.0 - self.beta2
            v += s
            # s := lr * (m / bias1) / (sqrt(v / bias2) + eps)
            np.divide(v, bias2, out=s)
            np.sqrt(s, out=s)
            s += self.eps
            np.divide(m, s, out=s)
            s *= self.lr / bias1
            p -= s


def make_optimizer(kind: str, lr: float, weight_decay: float = 0.0,
                   decay_mask: Optional[Sequence[bool]] = None) -> Optimizer:
    if kind == "adam":
        return Adam(lr, weight_decay, decay_mask)
    if kind == "sgd":
        return SGD(lr, weight_decay, decay_mask)
    raise ValueError(f"unknown optimizer kind {kind!r}")
