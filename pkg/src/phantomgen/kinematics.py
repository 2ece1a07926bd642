"""Skeletal data model and rotation math.

Conventions used across the package:

* quaternions are Hamilton ``(w, x, y, z)`` with unit norm and canonical
  sign ``w >= 0``; ``q`` and ``-q`` denote the same rotation,
* Euler angles are intrinsic Z-X-Y: ``alpha`` about Z, then ``beta`` about
  the rotated X, then ``gamma`` about the rotated Y, each in ``(-pi, pi]``,
* units are meters, seconds and radians throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

_UNIT_TOL = 1e-9
_GIMBAL_TOL = 1e-7


class TrackingStatus(IntEnum):
    """Sensor visibility code for one joint sample."""

    INVISIBLE = 0
    REFERRED = 1
    OBSERVABLE = 2


@dataclass(frozen=True)
class Quaternion:
    """Unit quaternion, normalized and sign-canonicalized on construction."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        w, x, y, z = self.w, self.x, self.y, self.z
        n = math.sqrt(w * w + x * x + y * y + z * z)
        if n < 1e-12:
            raise ValueError("cannot normalize a zero quaternion")
        # skip the divide when already unit, so stored components stay
        # bit-exact through serialization round trips
        if abs(n - 1.0) > 1e-12:
            s = 1.0 / n
            w, x, y, z = w * s, x * s, y * s, z * s
        if w < 0.0:
            w, x, y, z = -w, -x, -y, -z
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @staticmethod
    def identity() -> "Quaternion":
        return Quaternion(1.0, 0.0, 0.0, 0.0)

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def dot(self, other: "Quaternion") -> float:
        return self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z

    def multiply(self, other: "Quaternion") -> "Quaternion":
        """Hamilton product ``self * other`` (apply ``other`` first)."""
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return Quaternion(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def to_matrix(self) -> np.ndarray:
        """3x3 rotation matrix of the active rotation."""
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def rotate(self, v: Sequence[float]) -> np.ndarray:
        """Rotate a 3-vector."""
        return self.to_matrix() @ np.asarray(v, dtype=float)

    def angle_to(self, other: "Quaternion") -> float:
        """Geodesic rotation angle between two unit quaternions, in [0, pi]."""
        d = min(1.0, abs(self.dot(other)))
        return 2.0 * math.acos(d)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])


@dataclass(frozen=True)
class EulerAngle:
    """Intrinsic Z-X-Y rotation: ``alpha`` about Z, ``beta`` about X, ``gamma`` about Y.

    ``gimbal_lock`` marks results where ``|sin(beta)|`` was within 1e-7 of 1;
    there ``gamma`` is forced to 0 and the residual is folded into ``alpha``.
    """

    alpha: float
    beta: float
    gamma: float
    gimbal_lock: bool = False

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            a = getattr(self, name)
            if not math.isfinite(a):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, _wrap_angle(a))


def _wrap_angle(a: float) -> float:
    """Wrap into (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a > math.pi:
        a -= 2.0 * math.pi
    elif a <= -math.pi:
        a += 2.0 * math.pi
    return a


def quat_to_euler(q: Quaternion) -> EulerAngle:
    """Decompose a unit quaternion into intrinsic Z-X-Y angles.

    Near gimbal lock (middle angle at +-90 deg) the Z and Y axes coincide;
    the result is flagged, ``gamma`` set to 0 and the free angle returned
    as ``alpha``.
    """
    r = q.to_matrix()
    sb = r[2, 1]
    if abs(sb) >= 1.0 - _GIMBAL_TOL:
        beta = math.copysign(math.pi / 2.0, sb)
        # with gamma := 0 the remaining rotation collapses onto alpha
        alpha = math.atan2(r[1, 0], r[0, 0])
        return EulerAngle(alpha, beta, 0.0, gimbal_lock=True)
    beta = math.asin(max(-1.0, min(1.0, sb)))
    alpha = math.atan2(-r[0, 1], r[1, 1])
    gamma = math.atan2(-r[2, 0], r[2, 2])
    return EulerAngle(alpha, beta, gamma)


def euler_to_quat(e: EulerAngle) -> Quaternion:
    """Compose intrinsic Z-X-Y angles back into a unit quaternion."""
    qz = Quaternion(math.cos(e.alpha / 2.0), 0.0, 0.0, math.sin(e.alpha / 2.0))
    qx = Quaternion(math.cos(e.beta / 2.0), math.sin(e.beta / 2.0), 0.0, 0.0)
    qy = Quaternion(math.cos(e.gamma / 2.0), 0.0, math.sin(e.gamma / 2.0), 0.0)
    return qz.multiply(qx).multiply(qy)


def slerp(q0: Quaternion, q1: Quaternion, t: float) -> Quaternion:
    """Interpolate along the shorter great-circle arc from ``q0`` to ``q1``."""
    a0 = q0.as_array()
    a1 = q1.as_array()
    dot = float(a0 @ a1)
    if dot < 0.0:
        a1 = -a1
        dot = -dot
    if dot > 1.0 - _UNIT_TOL:
        # nearly parallel: slerp is ill-conditioned, fall back to nlerp
        v = a0 + t * (a1 - a0)
        return Quaternion(*v)
    omega = math.acos(min(1.0, dot))
    s = math.sin(omega)
    v = (math.sin((1.0 - t) * omega) / s) * a0 + (math.sin(t * omega) / s) * a1
    return Quaternion(*v)


@dataclass(frozen=True)
class JointFrame:
    """One joint sample: position (meters, sensor frame), rotation, status."""

    position: np.ndarray
    rotation: Quaternion
    status: TrackingStatus = TrackingStatus.OBSERVABLE

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float)
        if p.shape != (3,):
            raise ValueError(f"position must be a 3-vector, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("position components must be finite")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "status", TrackingStatus(self.status))


@dataclass(frozen=True)
class SkeletonFrame:
    """Time-stamped sample of every joint, ordered per the topology."""

    timestamp: float
    joints: tuple

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))


@dataclass(frozen=True)
class SkeletonTopology:
    """Ordered joint names plus (parent, child) bones forming a rooted tree."""

    joint_names: tuple
    bones: tuple

    def __post_init__(self):
        names = tuple(self.joint_names)
        bones = tuple((str(p), str(c)) for p, c in self.bones)
        if len(set(names)) != len(names):
            raise ValueError("joint names must be unique")
        index = {n: i for i, n in enumerate(names)}
        children = set()
        for p, c in bones:
            if p not in index or c not in index:
                raise ValueError(f"bone ({p}, {c}) references unknown joint")
            if c in children:
                raise ValueError(f"joint {c} has more than one parent")
            children.add(c)
        if len(bones) != len(names) - 1:
            raise ValueError("bones must form a spanning tree (|bones| = |joints| - 1)")
        roots = [n for n in names if n not in children]
        if len(roots) != 1:
            raise ValueError(f"expected exactly one root joint, found {roots}")
        # reachability from the root proves connectedness (and thus acyclicity)
        adj: dict = {n: [] for n in names}
        for p, c in bones:
            adj[p].append(c)
        seen = {roots[0]}
        stack = [roots[0]]
        while stack:
            for c in adj[stack.pop()]:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        if len(seen) != len(names):
            raise ValueError("bone tree does not cover all joints")
        object.__setattr__(self, "joint_names", names)
        object.__setattr__(self, "bones", bones)
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_root", roots[0])

    @property
    def root(self) -> str:
        return self._root

    @property
    def joint_count(self) -> int:
        return len(self.joint_names)

    def index_of(self, name: str) -> int:
        return self._index[name]

    def bone_indices(self) -> list:
        """Bones as (parent index, child index) pairs, topology order."""
        return [(self._index[p], self._index[c]) for p, c in self.bones]


@dataclass(frozen=True)
class MotionSequence:
    """Ordered skeleton frames sharing one topology."""

    topology: SkeletonTopology
    frames: tuple

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ValueError("a motion sequence must contain at least one frame")
        n = self.topology.joint_count
        prev_t = -math.inf
        for i, f in enumerate(frames):
            if len(f.joints) != n:
                raise ValueError(f"frame {i} has {len(f.joints)} joints, topology has {n}")
            if not f.timestamp > prev_t:
                raise ValueError(f"timestamps must be strictly increasing (frame {i})")
            prev_t = f.timestamp
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    def timestamps(self) -> np.ndarray:
        return np.array([f.timestamp for f in self.frames])

    def positions(self) -> np.ndarray:
        """(frames, joints, 3) position array."""
        return np.array([[j.position for j in f.joints] for f in self.frames])

    def quaternions(self) -> np.ndarray:
        """(frames, joints, 4) quaternion component array, w first."""
        return np.array([[j.rotation.as_array() for j in f.joints] for f in self.frames])

    def statuses(self) -> np.ndarray:
        """(frames, joints) integer status array."""
        return np.array([[int(j.status) for j in f.joints] for f in self.frames], dtype=np.int64)

    @staticmethod
    def from_arrays(
        topology: SkeletonTopology,
        timestamps: Iterable[float],
        positions: np.ndarray,
        quaternions: np.ndarray,
        statuses: np.ndarray,
    ) -> "MotionSequence":
        """Bulk constructor from (T, J, ...) arrays."""
        ts = list(timestamps)
        pos = np.asarray(positions, dtype=float)
        quat = np.asarray(quaternions, dtype=float)
        stat = np.asarray(statuses)
        frames = []
        for t in range(len(ts)):
            joints = tuple(
                JointFrame(pos[t, j], Quaternion(*quat[t, j]), TrackingStatus(int(stat[t, j])))
                for j in range(topology.joint_count)
            )
            frames.append(SkeletonFrame(ts[t], joints))
        return MotionSequence(topology, tuple(frames))


def bone_lengths(frame: SkeletonFrame, topo: SkeletonTopology) -> list:
    """Euclidean bone lengths in topology bone order."""
    if len(frame.joints) != topo.joint_count:
        raise ValueError("frame does not conform to topology")
    out = []
    for pi, ci in topo.bone_indices():
        out.append(float(np.linalg.norm(frame.joints[ci].position - frame.joints[pi].position)))
    return out
