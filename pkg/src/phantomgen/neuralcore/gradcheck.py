"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from phantomgen.neuralcore.network import Network, mse_loss

FD_STEP = 1e-5


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1.0, abs(analytic))


def grad_check(
    network: Network,
    x: np.ndarray,
    target: np.ndarray,
    h: float = FD_STEP,
    rng_factory: Optional[Callable[[], np.random.Generator]] = None,
    train: bool = False,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    The network must be deterministic per evaluation: either run with
    ``train=False`` (dropout off) or supply ``rng_factory`` returning an
    identically seeded generator so every evaluation draws the same masks.
    """
    if train and rng_factory is None:
        raise ValueError("train-mode grad check needs an rng_factory for reproducible masks")

    def fresh_rng():
        return rng_factory() if rng_factory is not None else None

    network.zero_grads()
    pred = network.forward(x, train=train, rng=fresh_rng())
    _, grad = mse_loss(pred, target)
    network.backward(grad)
    analytic = [g.copy() for _, g in network.gradients()]

    worst = 0.0
    for arr, ga in zip(network.parameter_arrays(), analytic):
        flat = arr.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp, _ = mse_loss(network.forward(x, train=train, rng=fresh_rng()), target)
            flat[i] = orig - h
            lm, _ = mse_loss(network.forward(x, train=train, rng=fresh_rng()), target)
            flat[i] = orig
            numeric = (lp - lm) / (2.0 * h)
            worst = max(worst, relative_error(float(gflat[i]), numeric))
    return worst
