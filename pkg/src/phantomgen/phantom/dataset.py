"""Frame sequences to training tensors: stacking, standardization, noise."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from phantomgen.kinematics import MotionSequence
from phantomgen.phantom.models import ChannelSet, ModelConfigError, NormalizationStats

TRAIN_FRACTION = 0.8
DEFAULT_NOISE_SIGMA = 0.1  # standardized units, applied to training inputs


class DatasetError(ValueError):
    pass


@dataclass
class GaitDataset:
    """Standardized train/test tensors plus the statistics to undo them."""

    channels: ChannelSet
    output_mode: str
    train_x: np.ndarray  # (N, J_in, 3)
    train_y: np.ndarray  # (N, rows, C)
    test_x: np.ndarray
    test_y: np.ndarray
    stats: NormalizationStats

    @property
    def n_train(self) -> int:
        return len(self.train_x)

    @property
    def n_test(self) -> int:
        return len(self.test_x)


def _stack(seq: MotionSequence, joints) -> np.ndarray:
    topo = seq.topology
    try:
        idx = [topo.index_of(j) for j in joints]
    except KeyError as e:
        raise DatasetError(f"sequence is missing channel joint {e.args[0]!r}") from e
    return seq.positions()[:, idx, :]


def _safe_scale(std: np.ndarray) -> np.ndarray:
    out = std.copy()
    out[out == 0.0] = 1.0  # constant features pass through unscaled
    return out


def standardize(x: np.ndarray, mean: np.ndarray, scale: np.ndarray) -> np.ndarray:
    return (x - mean) / scale


def destandardize(x: np.ndarray, mean: np.ndarray, scale: np.ndarray) -> np.ndarray:
    return x * scale + mean


def _shape_target(y: np.ndarray, output_mode: str) -> np.ndarray:
    if output_mode == "channels":
        return y
    n = y.shape[0]
    return y.reshape(n, -1)[:, :, None]  # (N, 3*J, 1), joint-major x/y/z rows


def make_dataset(
    seq: MotionSequence,
    channels: ChannelSet,
    noise_sigma: float = 0.0,
    output_mode: str = "channels",
    train_fraction: float = TRAIN_FRACTION,
    seed: int = 0,
) -> GaitDataset:
    """Stack channel positions, split contiguously, standardize on the train split.

    ``noise_sigma`` adds seeded Gaussian corruption (standardized units) to
    the training inputs only; targets and the test split stay clean.
    """
    if output_mode not in ("channels", "literal"):
        raise DatasetError(f"unknown output mode {output_mode!r}")
    x = _stack(seq, channels.input_joints)
    y = _stack(seq, channels.target_joints)
    n = len(x)
    n_train = int(n * train_fraction)
    if n_train < 1 or n_train >= n:
        raise DatasetError(f"cannot split {n} frames at fraction {train_fraction}")

    x_mean = x[:n_train].mean(axis=0)
    x_scale = _safe_scale(x[:n_train].std(axis=0))
    y_mean = y[:n_train].mean(axis=0)
    y_scale = _safe_scale(y[:n_train].std(axis=0))
    stats = NormalizationStats(x_mean, x_scale, y_mean, y_scale)
    stats.validate()

    xs = standardize(x, x_mean, x_scale)
    ys = standardize(y, y_mean, y_scale)
    train_x = xs[:n_train]
    test_x = xs[n_train:]
    if noise_sigma > 0.0:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xD07]))
        train_x = train_x + rng.normal(0.0, noise_sigma, train_x.shape)
    train_y = _shape_target(ys[:n_train], output_mode)
    test_y = _shape_target(ys[n_train:], output_mode)
    return GaitDataset(channels, output_mode, train_x, train_y, test_x, test_y, stats)
