"""Kinematic preprocessing: occlusion repair, smoothing, normalization, alignment.

All operations are pure: they take a :class:`MotionSequence` (or plain
arrays) and return new objects, never mutating their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from phantomgen.kinematics import (
    JointFrame,
    MotionSequence,
    Quaternion,
    SkeletonFrame,
    SkeletonTopology,
    TrackingStatus,
    euler_to_quat,
    slerp,
)

DEFAULT_PROCESS_NOISE = 1e-4
DEFAULT_MEASUREMENT_NOISE = 2.5e-3


class PreprocessError(ValueError):
    """Raised when an input violates an operation's preconditions."""


# ---------------------------------------------------------------------------
# occlusion repair


def fill_gaps(seq: MotionSequence) -> MotionSequence:
    """Repair Invisible/Referred samples bounded by Observable ones.

    Positions are linearly interpolated and rotations slerped, with the
    interpolation parameter proportional to the timestamp. Leading and
    trailing gaps are held at the nearest Observable sample. Every repaired
    sample is marked Referred. Idempotent.
    """
    ts = seq.timestamps()
    statuses = seq.statuses()
    n_frames, n_joints = statuses.shape
    observable = statuses == int(TrackingStatus.OBSERVABLE)

    for j in range(n_joints):
        if not observable[:, j].any():
            raise PreprocessError(
                f"joint '{seq.topology.joint_names[j]}' is never Observable; cannot repair"
            )

    new_joints: list = [list(f.joints) for f in seq.frames]
    changed = False
    for j in range(n_joints):
        obs_idx = np.nonzero(observable[:, j])[0]
        for t in range(n_frames):
            if observable[t, j]:
                continue
            changed = True
            right = np.searchsorted(obs_idx, t)
            if right == 0:  # leading gap: hold the first Observable value
                anchor = seq.frames[obs_idx[0]].joints[j]
                repaired = JointFrame(anchor.position, anchor.rotation, TrackingStatus.REFERRED)
            elif right == len(obs_idx):  # trailing gap
                anchor = seq.frames[obs_idx[-1]].joints[j]
                repaired = JointFrame(anchor.position, anchor.rotation, TrackingStatus.REFERRED)
            else:
                p, n = obs_idx[right - 1], obs_idx[right]
                u = (ts[t] - ts[p]) / (ts[n] - ts[p])
                a, b = seq.frames[p].joints[j], seq.frames[n].joints[j]
                pos = a.position + u * (b.position - a.position)
                rot = slerp(a.rotation, b.rotation, float(u))
                repaired = JointFrame(pos, rot, TrackingStatus.REFERRED)
            new_joints[t][j] = repaired
    if not changed:
        return seq
    frames = tuple(
        SkeletonFrame(seq.frames[t].timestamp, tuple(new_joints[t])) for t in range(n_frames)
    )
    return MotionSequence(seq.topology, frames)


# ---------------------------------------------------------------------------
# Kalman smoothing


@dataclass
class KalmanState:
    """Constant-velocity filter state for one tracked scalar.

    State is [value, velocity]; ``q`` is the white-noise acceleration
    spectral density and ``r`` the measurement noise variance.
    """

    x: np.ndarray
    p: np.ndarray
    q: float
    r: float

    @staticmethod
    def initial(value: float, q: float, r: float) -> "KalmanState":
        return KalmanState(
            x=np.array([value, 0.0]),
            p=np.array([[r, 0.0], [0.0, 1.0]]),
            q=q,
            r=r,
        )

    def predict(self, dt: float) -> None:
        f = np.array([[1.0, dt], [0.0, 1.0]])
        qm = self.q * np.array(
            [[dt**4 / 4.0, dt**3 / 2.0], [dt**3 / 2.0, dt**2]]
        )
        self.x = f @ self.x
        self.p = f @ self.p @ f.T + qm
        self.p = 0.5 * (self.p + self.p.T)

    def update(self, z: float) -> None:
        s = self.p[0, 0] + self.r
        k = self.p[:, 0] / s
        self.x = self.x + k * (z - self.x[0])
        ikh = np.eye(2)
        ikh[:, 0] -= k
        # Joseph form keeps the covariance PSD
        self.p = ikh @ self.p @ ikh.T + self.r * np.outer(k, k)
        self.p = 0.5 * (self.p + self.p.T)

    @property
    def value(self) -> float:
        return float(self.x[0])


def _kalman_series(z: np.ndarray, visible: np.ndarray, dt: float, q: float, r: float) -> np.ndarray:
    """Filter one scalar series; invisible samples are predict-only."""
    state = KalmanState.initial(float(z[0]), q, r)
    out = np.empty_like(z)
    out[0] = state.value
    for t in range(1, len(z)):
        state.predict(dt)
        if visible[t]:
            state.update(float(z[t]))
        out[t] = state.value
    return out


def kalman_smooth(
    seq: MotionSequence,
    q: float = DEFAULT_PROCESS_NOISE,
    r: float = DEFAULT_MEASUREMENT_NOISE,
) -> MotionSequence:
    """Smooth joint positions and rotations with a constant-velocity filter.

    Runs one filter per joint per position coordinate; rotations are
    smoothed by filtering the four quaternion components and renormalizing.
    Invisible samples get the prediction only (no measurement update).
    Requires uniform sampling within 5% jitter.
    """
    if q <= 0 or r <= 0:
        raise PreprocessError("q and r must be positive")
    ts = seq.timestamps()
    if len(ts) < 2:
        return seq
    dts = np.diff(ts)
    dt = float(np.median(dts))
    if np.any(np.abs(dts - dt) > 0.05 * dt):
        raise PreprocessError("kalman_smooth requires uniform sampling (5% jitter tolerance)")

    pos = seq.positions()
    quat = seq.quaternions()
    statuses = seq.statuses()
    visible = statuses != int(TrackingStatus.INVISIBLE)

    n_frames, n_joints = statuses.shape
    new_pos = np.empty_like(pos)
    new_quat = np.empty_like(quat)
    for j in range(n_joints):
        vis = visible[:, j]
        for c in range(3):
            new_pos[:, j, c] = _kalman_series(pos[:, j, c], vis, dt, q, r)
        for c in range(4):
            new_quat[:, j, c] = _kalman_series(quat[:, j, c], vis, dt, q, r)

    return MotionSequence.from_arrays(seq.topology, ts, new_pos, new_quat, statuses)


# ---------------------------------------------------------------------------
# spatial normalization


@dataclass(frozen=True)
class NormalizationParams:
    """Targets for spatial normalization.

    ``reference_lengths`` follow the topology's bone order. The yaw
    alignment turns the skeleton about the vertical (+Y) axis until the
    left->right shoulder line, projected to the horizontal plane, points
    along ``facing_axis``; ``origin_joint`` is then translated to (0,0,0).
    """

    reference_lengths: tuple
    facing_axis: tuple = (0.0, 0.0, 1.0)
    origin_joint: str = "spine_base"
    left_shoulder: str = "shoulder_l"
    right_shoulder: str = "shoulder_r"

    def __post_init__(self):
        lengths = tuple(float(v) for v in self.reference_lengths)
        if any(v <= 0 for v in lengths):
            raise PreprocessError("reference bone lengths must all be positive")
        axis = np.asarray(self.facing_axis, dtype=float)
        n = np.linalg.norm(axis)
        if n == 0:
            raise PreprocessError("facing axis must be nonzero")
        object.__setattr__(self, "reference_lengths", lengths)
        object.__setattr__(self, "facing_axis", tuple(axis / n))

    @staticmethod
    def from_reference_frame(
        frame: SkeletonFrame, topo: SkeletonTopology, **kwargs
    ) -> "NormalizationParams":
        from phantomgen.kinematics import bone_lengths

        return NormalizationParams(tuple(bone_lengths(frame, topo)), **kwargs)


def _bones_root_to_leaf(topo: SkeletonTopology) -> list:
    """Bone list (with original bone indices) ordered parents-first."""
    by_parent: dict = {}
    for bi, (p, c) in enumerate(topo.bones):
        by_parent.setdefault(p, []).append((bi, p, c))
    ordered = []
    stack = [topo.root]
    while stack:
        name = stack.pop()
        for bi, p, c in by_parent.get(name, []):
            ordered.append((bi, p, c))
            stack.append(c)
    return ordered


def normalize_spatial(seq: MotionSequence, params: NormalizationParams) -> MotionSequence:
    """Apply bone scaling, yaw alignment and origin translation to every frame."""
    topo = seq.topology
    if len(params.reference_lengths) != len(topo.bones):
        raise PreprocessError(
            f"expected {len(topo.bones)} reference lengths, got {len(params.reference_lengths)}"
        )
    bone_order = _bones_root_to_leaf(topo)
    origin = topo.index_of(params.origin_joint)
    sh_l = topo.index_of(params.left_shoulder)
    sh_r = topo.index_of(params.right_shoulder)
    target_yaw = math.atan2(params.facing_axis[0], params.facing_axis[2])

    new_frames = []
    for fi, frame in enumerate(seq.frames):
        old = np.array([j.position for j in frame.joints])
        pos = old.copy()
        # 1. rescale bones root-to-leaf, preserving each bone's direction
        for bi, p, c in bone_order:
            pi, ci = topo.index_of(p), topo.index_of(c)
            vec = old[ci] - old[pi]
            length = np.linalg.norm(vec)
            if length == 0.0:
                raise PreprocessError(
                    f"zero-length bone ({p}, {c}) in frame {fi} with nonzero reference"
                )
            pos[ci] = pos[pi] + vec * (params.reference_lengths[bi] / length)
        # 2. rotate about the vertical axis to align the shoulder line
        line = pos[sh_r] - pos[sh_l]
        if math.hypot(line[0], line[2]) < 1e-12:
            raise PreprocessError(f"shoulder line has no horizontal component in frame {fi}")
        yaw = target_yaw - math.atan2(line[0], line[2])
        q_yaw = euler_to_quat_yaw(yaw)
        rot = q_yaw.to_matrix()
        pos = pos @ rot.T
        # 3. translate the origin joint to (0,0,0)
        pos = pos - pos[origin]
        joints = tuple(
            JointFrame(pos[j], q_yaw.multiply(frame.joints[j].rotation), frame.joints[j].status)
            for j in range(topo.joint_count)
        )
        new_frames.append(SkeletonFrame(frame.timestamp, joints))
    return MotionSequence(topo, tuple(new_frames))


def euler_to_quat_yaw(yaw: float) -> Quaternion:
    """Quaternion for a rotation of ``yaw`` radians about the vertical (+Y) axis."""
    return Quaternion(math.cos(yaw / 2.0), 0.0, math.sin(yaw / 2.0), 0.0)


# ---------------------------------------------------------------------------
# Savitzky-Golay smoothing

DEFAULT_SAVGOL_WINDOW = 9
DEFAULT_SAVGOL_ORDER = 3


def savitzky_golay(
    series: Sequence[float],
    window: int = DEFAULT_SAVGOL_WINDOW,
    order: int = DEFAULT_SAVGOL_ORDER,
) -> np.ndarray:
    """Least-squares local polynomial smoothing.

    Interior samples use the centered window; each edge sample is refit on
    the window truncated at the series boundary (one-sided), which keeps
    polynomials of degree <= ``order`` exactly invariant everywhere.
    """
    y = np.asarray(series, dtype=float)
    if y.ndim != 1:
        raise PreprocessError("series must be one-dimensional")
    if window % 2 == 0 or window <= 0:
        raise PreprocessError("window must be a positive odd integer")
    if order < 0 or order >= window:
        raise PreprocessError("need window > order >= 0")
    if len(y) < window:
        raise PreprocessError(f"series length {len(y)} is shorter than window {window}")

    half = window // 2
    offsets = np.arange(-half, half + 1)
    a = np.vander(offsets, order + 1, increasing=True)
    center_coeffs = np.linalg.pinv(a)[0]  # row 0 evaluates the fit at offset 0

    out = np.convolve(y, center_coeffs[::-1], mode="same")
    # refit the edges on the truncated windows
    for i in range(half):
        lo, hi = 0, i + half + 1
        off = np.arange(lo, hi) - i
        aw = np.vander(off, order + 1, increasing=True)
        coef, *_ = np.linalg.lstsq(aw, y[lo:hi], rcond=None)
        out[i] = coef[0]
    n = len(y)
    for i in range(n - half, n):
        lo, hi = i - half, n
        off = np.arange(lo, hi) - i
        aw = np.vander(off, order + 1, increasing=True)
        coef, *_ = np.linalg.lstsq(aw, y[lo:hi], rcond=None)
        out[i] = coef[0]
    return out


# ---------------------------------------------------------------------------
# dynamic time warping


def dtw_align(
    a: Sequence, b: Sequence, band: Optional[int] = None
) -> "tuple[float, list]":
    """Align two sequences of feature vectors under Euclidean local cost.

    Returns ``(cost, path)`` where the path is monotone, starts at (0, 0)
    and ends at (len(a)-1, len(b)-1), and the cost is the minimal sum of
    local costs along any such path. ``band`` optionally restricts the
    alignment to a Sakoe-Chiba band of that radius (off by default).
    Tie-breaks during traceback prefer the diagonal step.
    """
    xa = np.asarray(a, dtype=float)
    xb = np.asarray(b, dtype=float)
    if xa.size == 0 or xb.size == 0:
        raise PreprocessError("dtw_align requires non-empty sequences")
    if xa.ndim == 1:
        xa = xa[:, None]
    if xb.ndim == 1:
        xb = xb[:, None]
    n, m = len(xa), len(xb)

    local = np.linalg.norm(xa[:, None, :] - xb[None, :, :], axis=2)
    if band is not None:
        mask = np.abs(np.arange(n)[:, None] - np.arange(m)[None, :]) > band
        local = np.where(mask, np.inf, local)

    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            acc[i, j] = local[i - 1, j - 1] + min(
                acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]
            )

    path = [(n - 1, m - 1)]
    i, j = n, m
    while (i, j) != (1, 1):
        choices = (acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])
        step = int(np.argmin(choices))  # diagonal preferred on ties
        if step == 0:
            i, j = i - 1, j - 1
        elif step == 1:
            i = i - 1
        else:
            j = j - 1
        path.append((i - 1, j - 1))
    path.reverse()
    return float(acc[n, m]), path


# ---------------------------------------------------------------------------
# singular value decomposition (one-sided Jacobi)

_JACOBI_TOL = 1e-12
_JACOBI_MAX_SWEEPS = 60


@dataclass(frozen=True)
class ModeDecomposition:
    """Top-k singular triplets of a time x features motion matrix."""

    singular_values: np.ndarray
    left_modes: np.ndarray  # (time, k)
    right_modes: np.ndarray  # (features, k)

    def __post_init__(self):
        s = np.asarray(self.singular_values, dtype=float)
        if np.any(s < 0):
            raise PreprocessError("singular values must be non-negative")
        if np.any(np.diff(s) > 0):
            raise PreprocessError("singular values must be sorted descending")
        for name, m in (("left_modes", self.left_modes), ("right_modes", self.right_modes)):
            gram = m.T @ m
            if not np.allclose(gram, np.eye(m.shape[1]), atol=1e-8):
                raise PreprocessError(f"{name} are not orthonormal")

    @property
    def k(self) -> int:
        return len(self.singular_values)

    def reconstruct(self) -> np.ndarray:
        return (self.left_modes * self.singular_values) @ self.right_modes.T


def _jacobi_svd(a: np.ndarray) -> "tuple[np.ndarray, np.ndarray, np.ndarray]":
    """One-sided Jacobi SVD: returns (u, s, v) with a = u @ diag(s) @ v.T."""
    b = np.array(a, dtype=float)
    n_rows, n_cols = b.shape
    v = np.eye(n_cols)
    for _ in range(_JACOBI_MAX_SWEEPS):
        converged = True
        for p in range(n_cols - 1):
            for q_col in range(p + 1, n_cols):
                alpha = b[:, p] @ b[:, p]
                beta = b[:, q_col] @ b[:, q_col]
                gamma = b[:, p] @ b[:, q_col]
                if abs(gamma) <= _JACOBI_TOL * math.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                converged = False
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                bp = b[:, p].copy()
                b[:, p] = c * bp - s * b[:, q_col]
                b[:, q_col] = s * bp + c * b[:, q_col]
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q_col]
                v[:, q_col] = s * vp + c * v[:, q_col]
        if converged:
            break
    sigma = np.linalg.norm(b, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    b = b[:, order]
    v = v[:, order]
    u = np.zeros_like(b)
    cutoff = max(n_rows, n_cols) * np.finfo(float).eps * (sigma[0] if len(sigma) else 0.0)
    for j in range(n_cols):
        if sigma[j] > cutoff:
            u[:, j] = b[:, j] / sigma[j]
        else:
            sigma[j] = 0.0
            u[:, j] = _orthonormal_completion(u[:, :j], n_rows)
    return u, sigma, v


def _orthonormal_completion(existing: np.ndarray, dim: int) -> np.ndarray:
    """Deterministic unit vector orthogonal to the given columns."""
    for e in range(dim):
        cand = np.zeros(dim)
        cand[e] = 1.0
        if existing.shape[1]:
            cand -= existing @ (existing.T @ cand)
        norm = np.linalg.norm(cand)
        if norm > 1e-8:
            return cand / norm
    raise PreprocessError("cannot complete orthonormal basis")


def svd_modes(motion: np.ndarray, k: int) -> ModeDecomposition:
    """Top-k singular triplets of the (time x features) motion matrix."""
    a = np.asarray(motion, dtype=float)
    if a.ndim != 2:
        raise PreprocessError("motion must be a 2-D array")
    limit = min(a.shape)
    if not 1 <= k <= limit:
        raise PreprocessError(f"k must be in [1, {limit}], got {k}")
    u, s, v = _jacobi_svd(a)
    return ModeDecomposition(s[:k].copy(), u[:, :k].copy(), v[:, :k].copy())
