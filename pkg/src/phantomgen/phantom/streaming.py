"""Streaming phantom-limb generation: one frame in, one frame out."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

from phantomgen.phantom.dataset import destandardize, standardize
from phantomgen.phantom.models import PhantomModel


@dataclass(frozen=True)
class InputFrame:
    """Observed upper-limb sample: timestamp plus name->position mapping."""

    timestamp: float
    positions: dict


@dataclass(frozen=True)
class GeneratedFrame:
    """Predicted target-joint positions (meters) for one input frame."""

    timestamp: float
    joint_names: tuple
    positions: np.ndarray  # (J_target, 3)


@dataclass
class StreamStats:
    frames_in: int = 0
    frames_out: int = 0
    skipped: int = 0
    latencies_us: list = field(default_factory=list)

    def median_latency_us(self) -> float:
        if not self.latencies_us:
            return float("nan")
        return float(np.median(self.latencies_us))

    def throughput_fps(self) -> float:
        med = self.median_latency_us()
        return 1e6 / med if med > 0 else float("inf")


def _gather_input(model: PhantomModel, frame: InputFrame) -> Optional[np.ndarray]:
    joints = model.spec.channels.input_joints
    x = np.empty((1, len(joints), 3))
    for i, name in enumerate(joints):
        pos = frame.positions.get(name)
        if pos is None:
            return None
        p = np.asarray(pos, dtype=float)
        if p.shape != (3,) or not np.all(np.isfinite(p)):
            return None
        x[0, i] = p
    return x


def generate_stream(
    model: PhantomModel,
    frames: Iterable[InputFrame],
    stats: Optional[StreamStats] = None,
) -> Iterator[GeneratedFrame]:
    """Map each incoming frame to target-joint positions.

    Stateless across frames; malformed frames (missing joints, non-finite
    values) are counted and skipped, never aborting the stream.
    """
    if model.stats is None:
        raise ValueError("model has no normalization statistics; train or load it first")
    target_joints = model.spec.channels.target_joints
    st = model.stats
    for frame in frames:
        if stats is not None:
            stats.frames_in += 1
        t0 = time.perf_counter()
        x = _gather_input(model, frame)
        if x is None or not math.isfinite(frame.timestamp):
            if stats is not None:
                stats.skipped += 1
            continue
        xs = standardize(x, st.x_mean, st.x_scale)
        ys = model.forward_standardized(xs)
        y = ys.reshape(1, len(target_joints), 3)  # literal rows fold back to xyz
        positions = destandardize(y, st.y_mean, st.y_scale)[0]
        latency = time.perf_counter() - t0
        if stats is not None:
            stats.frames_out += 1
            stats.latencies_us.append(1e6 * latency)
        yield GeneratedFrame(frame.timestamp, target_joints, positions)
