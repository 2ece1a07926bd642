"""Layer set: 1-D convolution, max-pooling, upsampling, dropout, dense.

Conv-lane layers take ``(B, L, C)`` activations, dense layers ``(B, n)``.
Every layer caches what its backward pass needs during forward; backward
writes the batch gradients into ``layer.grads`` keyed like
``layer.params`` (overwriting, one backward per forward).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from phantomgen.neuralcore import kernels

ACTIVATIONS = ("linear", "relu")


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    """Declarative layer description; ``build`` turns it into an instance."""

    kind: str
    filters: Optional[int] = None
    kernel_size: Optional[int] = None
    padding: str = "same"
    pool_size: Optional[int] = None
    upsample_size: Optional[int] = None
    rate: Optional[float] = None
    units: Optional[int] = None
    activation: str = "linear"

    def __post_init__(self):
        kinds = ("Conv1D", "MaxPool1D", "Upsample1D", "Dropout", "Dense", "Activation")
        if self.kind not in kinds:
            raise ShapeError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")
        if self.kind == "Conv1D":
            if not self.filters or not self.kernel_size:
                raise ShapeError("Conv1D needs filters and kernel_size")
            if self.padding != "same":
                raise ShapeError("only 'same' padding is supported")
            if self.kernel_size % 2 == 0:
                raise ShapeError("kernel size must be odd for 'same' padding")
        elif self.kind == "MaxPool1D":
            if not self.pool_size or self.pool_size < 1:
                raise ShapeError("pool size must be >= 1")
        elif self.kind == "Upsample1D":
            if not self.upsample_size or self.upsample_size < 1:
                raise ShapeError("upsample size must be >= 1")
        elif self.kind == "Dropout":
            if self.rate is None or not 0.0 <= self.rate < 1.0:
                raise ShapeError("dropout rate must be in [0, 1)")
        elif self.kind == "Dense":
            if not self.units:
                raise ShapeError("Dense needs units")

    def build(self) -> "Layer":
        cls = {
            "Conv1D": Conv1D,
            "MaxPool1D": MaxPool1D,
            "Upsample1D": Upsample1D,
            "Dropout": Dropout,
            "Dense": Dense,
            "Activation": Activation,
        }[self.kind]
        return cls(self)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for name in (
            "filters",
            "kernel_size",
            "pool_size",
            "upsample_size",
            "rate",
            "units",
        ):
            v = getattr(self, name)
            if v is not None:
                out[name] = v
        if self.kind in ("Conv1D", "Dense", "Activation"):
            out["activation"] = self.activation
        if self.kind == "Conv1D":
            out["padding"] = self.padding
        return out

    @staticmethod
    def from_dict(d: dict) -> "LayerSpec":
        return LayerSpec(**d)


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base: parameter-free identity."""

    def __init__(self, spec: LayerSpec):
        self.spec = spec
        self.params: dict = {}
        self.grads: dict = {}

    def initialize(self, in_shape, rng: np.random.Generator):
        """Set up parameters for the given input shape; returns the output shape."""
        return in_shape

    def forward(self, x: np.ndarray, train: bool, rng: Optional[np.random.Generator]) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def zero_grads(self):
        for k, v in self.params.items():
            if k in self.grads:
                self.grads[k].fill(0.0)
            else:
                self.grads[k] = np.zeros_like(v)

    def param_items(self):
        return sorted(self.params.items())


def _apply_activation(z: np.ndarray, activation: str):
    if activation == "relu":
        mask = z > 0
        return z * mask, mask
    return z, None


def _activation_grad(grad: np.ndarray, mask) -> np.ndarray:
    if mask is None:
        return grad
    return grad * mask


class Conv1D(Layer):
    def initialize(self, in_shape, rng):
        length, cin = in_shape
        k, co = self.spec.kernel_size, self.spec.filters
        self.params = {
            "w": glorot_uniform(rng, (k, cin, co), fan_in=k * cin, fan_out=k * co),
            "b": np.zeros(co),
        }
        self.zero_grads()
        return (length, co)

    def forward(self, x, train, rng):
        relu = self.spec.activation == "relu"
        x = np.ascontiguousarray(x)
        out = kernels.conv1d_forward(x, self.params["w"], self.params["b"], relu)
        self._cache = (x, out if relu else None)  # the relu output gates backward
        return out

    def backward(self, grad_out):
        x, relu_out = self._cache
        gx, gw, gb = kernels.conv1d_backward(
            x, self.params["w"], np.ascontiguousarray(grad_out), relu_out
        )
        self.grads["w"] = gw
        self.grads["b"] = gb
        return gx


class MaxPool1D(Layer):
    def initialize(self, in_shape, rng):
        length, c = in_shape
        if length % self.spec.pool_size != 0:
            raise ShapeError(
                f"length {length} not divisible by pool size {self.spec.pool_size}"
            )
        return (length // self.spec.pool_size, c)

    def forward(self, x, train, rng):
        if x.shape[1] % self.spec.pool_size != 0:
            raise ShapeError(
                f"length {x.shape[1]} not divisible by pool size {self.spec.pool_size}"
            )
        out, idx = kernels.maxpool1d_forward(np.ascontiguousarray(x), self.spec.pool_size)
        self._cache = (idx, x.shape[1])
        return out

    def backward(self, grad_out):
        idx, length = self._cache
        return kernels.maxpool1d_backward(np.ascontiguousarray(grad_out), idx, length)


class Upsample1D(Layer):
    def initialize(self, in_shape, rng):
        length, c = in_shape
        return (length * self.spec.upsample_size, c)

    def forward(self, x, train, rng):
        return kernels.upsample1d_forward(np.ascontiguousarray(x), self.spec.upsample_size)

    def backward(self, grad_out):
        return kernels.upsample1d_backward(
            np.ascontiguousarray(grad_out), self.spec.upsample_size
        )


class Dropout(Layer):
    """Inverted dropout: identity at inference, seeded mask in training.

    The mask stream is splitmix64 keyed by one draw from the caller's RNG,
    identical across kernel backends.
    """

    def forward(self, x, train, rng):
        rate = self.spec.rate
        if not train or rate == 0.0:
            self._scale = None
            return x
        if rng is None:
            raise ValueError("training-mode dropout needs an RNG")
        seed = int(rng.integers(0, 2**63))
        x3 = x if x.ndim == 3 else x[:, :, None]
        out, scale = kernels.dropout_forward(np.ascontiguousarray(x3), rate, seed)
        self._scale = scale
        if x.ndim != 3:
            return out[:, :, 0]
        return out

    def backward(self, grad_out):
        if self._scale is None:
            return grad_out
        g3 = grad_out if grad_out.ndim == 3 else grad_out[:, :, None]
        out = g3 * self._scale
        if grad_out.ndim != 3:
            return out[:, :, 0]
        return out


class Activation(Layer):
    def forward(self, x, train, rng):
        out, mask = _apply_activation(x, self.spec.activation)
        self._mask = mask
        return out

    def backward(self, grad_out):
        return _activation_grad(grad_out, self._mask)


class Dense(Layer):
    def initialize(self, in_shape, rng):
        (n,) = in_shape
        m = self.spec.units
        self.params = {
            "w": glorot_uniform(rng, (n, m), fan_in=n, fan_out=m),
            "b": np.zeros(m),
        }
        self.zero_grads()
        return (m,)

    def forward(self, x, train, rng):
        if x.ndim != 2 or x.shape[1] != self.params["w"].shape[0]:
            raise ShapeError(
                f"dense layer expects (B, {self.params['w'].shape[0]}), got {x.shape}"
            )
        z = x @ self.params["w"] + self.params["b"]
        out, mask = _apply_activation(z, self.spec.activation)
        self._cache = (x, mask)
        return out

    def backward(self, grad_out):
        x, mask = self._cache
        grad_out = _activation_grad(grad_out, mask)
        self.grads["w"] = x.T @ grad_out
        self.grads["b"] = grad_out.sum(axis=0)
        return grad_out @ self.params["w"].T
