"""Kinetic-data codecs and the deterministic synthetic gait generator.

JSON document layout::

    {"skeleton": {"joints": [...], "bones": [["parent","child"], ...]},
     "frames": [{"t": 0.0,
                 "joints": [{"name": "...", "pos": [x, y, z],
                             "rot": [w, x, y, z], "status": 0|1|2}, ...]}]}

``force`` and ``momentum`` are reserved per-joint field names: readers
accept and ignore them, writers never emit them. The CSV layout is one
header row (``timestamp`` then 8 columns per joint: 3 position, 4
quaternion, 1 status), preceded by a ``# bones:`` comment carrying the
topology. Numbers are serialized with Python's shortest round-trip
representation, so read(write(seq)) is bit-exact.
"""

from __future__ import annotations

import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, TextIO, Union

import numpy as np

from phantomgen import skeleton
from phantomgen.kinematics import (
    MotionSequence,
    SkeletonTopology,
    TrackingStatus,
)

QUAT_NORM_TOL = 1e-6

PathOrStream = Union[str, "io.IOBase", TextIO]


class DataFormatError(ValueError):
    """Raised on any schema violation; the message carries the JSON path."""


# ---------------------------------------------------------------------------
# JSON codec


def _fmt(v: float) -> float:
    return float(v)


def sequence_to_document(seq: MotionSequence) -> dict:
    frames = []
    for f in seq.frames:
        joints = []
        for name, j in zip(seq.topology.joint_names, f.joints):
            joints.append(
                {
                    "name": name,
                    "pos": [_fmt(v) for v in j.position],
                    "rot": [_fmt(j.rotation.w), _fmt(j.rotation.x), _fmt(j.rotation.y), _fmt(j.rotation.z)],
                    "status": int(j.status),
                }
            )
        frames.append({"t": _fmt(f.timestamp), "joints": joints})
    return {
        "skeleton": {
            "joints": list(seq.topology.joint_names),
            "bones": [[p, c] for p, c in seq.topology.bones],
        },
        "frames": frames,
    }


def write_json(seq: MotionSequence, target: PathOrStream):
    doc = sequence_to_document(seq)
    if hasattr(target, "write"):
        json.dump(doc, target)
    else:
        with open(target, "w") as fh:
            json.dump(doc, fh)


_ALLOWED_JOINT_KEYS = {"name", "pos", "rot", "status", "force", "momentum"}


def _require(cond: bool, path: str, message: str):
    if not cond:
        raise DataFormatError(f"{path}: {message}")


def document_to_sequence(doc: dict) -> MotionSequence:
    _require(isinstance(doc, dict), "$", "document must be an object")
    _require("skeleton" in doc, "$", "missing 'skeleton'")
    _require("frames" in doc, "$", "missing 'frames'")
    sk = doc["skeleton"]
    _require(isinstance(sk, dict) and "joints" in sk and "bones" in sk,
             "skeleton", "needs 'joints' and 'bones'")
    try:
        topo = SkeletonTopology(tuple(sk["joints"]), tuple(tuple(b) for b in sk["bones"]))
    except ValueError as e:
        raise DataFormatError(f"skeleton: {e}") from e

    frames_doc = doc["frames"]
    _require(isinstance(frames_doc, list) and frames_doc, "frames", "must be a non-empty array")
    n_joints = topo.joint_count
    timestamps = []
    positions = np.empty((len(frames_doc), n_joints, 3))
    quats = np.empty((len(frames_doc), n_joints, 4))
    statuses = np.empty((len(frames_doc), n_joints), dtype=np.int64)
    for fi, frame in enumerate(frames_doc):
        fpath = f"frames[{fi}]"
        _require(isinstance(frame, dict) and "t" in frame and "joints" in frame,
                 fpath, "needs 't' and 'joints'")
        _require(isinstance(frame["t"], (int, float)), f"{fpath}.t", "must be a number")
        timestamps.append(float(frame["t"]))
        joints = frame["joints"]
        _require(len(joints) == n_joints, f"{fpath}.joints",
                 f"expected {n_joints} joints, got {len(joints)}")
        for ji, joint in enumerate(joints):
            jpath = f"{fpath}.joints[{ji}]"
            _require(isinstance(joint, dict), jpath, "must be an object")
            extra = set(joint) - _ALLOWED_JOINT_KEYS
            _require(not extra, jpath, f"unknown fields {sorted(extra)}")
            name = joint.get("name")
            _require(name == topo.joint_names[ji], f"{jpath}.name",
                     f"expected '{topo.joint_names[ji]}', got '{name}'")
            pos = joint.get("pos")
            _require(isinstance(pos, list) and len(pos) == 3, f"{jpath}.pos",
                     "must be a 3-element array")
            _require(all(isinstance(v, (int, float)) and math.isfinite(v) for v in pos),
                     f"{jpath}.pos", "components must be finite numbers")
            rot = joint.get("rot")
            _require(isinstance(rot, list) and len(rot) == 4, f"{jpath}.rot",
                     "must be a 4-element array (w, x, y, z)")
            norm = math.sqrt(sum(float(v) ** 2 for v in rot))
            _require(norm > 1e-12, f"{jpath}.rot", "zero quaternion")
            if abs(norm - 1.0) > QUAT_NORM_TOL:
                warnings.warn(
                    f"{jpath}.rot: quaternion norm {norm:.9f} off unit; renormalizing",
                    stacklevel=2,
                )
            status = joint.get("status")
            _require(isinstance(status, int) and status in (0, 1, 2), f"{jpath}.status",
                     f"bad tracking status {status!r} (joint '{name}', frame {fi})")
            positions[fi, ji] = pos
            quats[fi, ji] = rot
            statuses[fi, ji] = status
    try:
        return MotionSequence.from_arrays(topo, timestamps, positions, quats, statuses)
    except ValueError as e:
        raise DataFormatError(f"frames: {e}") from e


def read_json(source: PathOrStream) -> MotionSequence:
    if hasattr(source, "read"):
        doc = json.load(source)
    else:
        with open(source) as fh:
            doc = json.load(fh)
    return document_to_sequence(doc)


# ---------------------------------------------------------------------------
# CSV codec

_PER_JOINT_COLS = ("px", "py", "pz", "qw", "qx", "qy", "qz", "status")


def write_csv(seq: MotionSequence, target: PathOrStream):
    lines = []
    bones = ";".join(f"{p}>{c}" for p, c in seq.topology.bones)
    lines.append(f"# bones: {bones}")
    header = ["timestamp"]
    for name in seq.topology.joint_names:
        header += [f"{name}_{c}" for c in _PER_JOINT_COLS]
    lines.append(",".join(header))
    for f in seq.frames:
        row = [repr(float(f.timestamp))]
        for j in f.joints:
            row += [repr(float(v)) for v in j.position]
            row += [repr(float(v)) for v in (j.rotation.w, j.rotation.x, j.rotation.y, j.rotation.z)]
            row.append(str(int(j.status)))
        lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w") as fh:
            fh.write(text)


def read_csv(source: PathOrStream, bones: Optional[tuple] = None) -> MotionSequence:
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source) as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if lines and lines[0].startswith("# bones:"):
        spec = lines[0].split(":", 1)[1].strip()
        parsed = tuple(tuple(pair.split(">")) for pair in spec.split(";") if pair)
        bones = parsed if bones is None else bones
        lines = lines[1:]
    if bones is None:
        raise DataFormatError(
            "CSV lacks a '# bones:' comment; pass bones=... to reconstruct the topology"
        )
    if not lines:
        raise DataFormatError("CSV has no header row")
    header = lines[0].split(",")
    if header[0] != "timestamp" or (len(header) - 1) % len(_PER_JOINT_COLS) != 0:
        raise DataFormatError(
            f"malformed header: expected 'timestamp' plus {len(_PER_JOINT_COLS)} columns per joint"
        )
    n_joints = (len(header) - 1) // len(_PER_JOINT_COLS)
    names = []
    for ji in range(n_joints):
        cols = header[1 + ji * 8 : 1 + (ji + 1) * 8]
        suffixes = tuple(c.rsplit("_", 1)[1] for c in cols)
        if suffixes != _PER_JOINT_COLS:
            raise DataFormatError(f"joint {ji}: column suffixes {suffixes} do not match schema")
        base = {c.rsplit("_", 1)[0] for c in cols}
        if len(base) != 1:
            raise DataFormatError(f"joint {ji}: inconsistent joint name in columns")
        names.append(base.pop())
    topo = SkeletonTopology(tuple(names), bones)

    n_frames = len(lines) - 1
    if n_frames == 0:
        raise DataFormatError("CSV has no data rows")
    timestamps = []
    positions = np.empty((n_frames, n_joints, 3))
    quats = np.empty((n_frames, n_joints, 4))
    statuses = np.empty((n_frames, n_joints), dtype=np.int64)
    expected_cols = 1 + 8 * n_joints
    for fi, line in enumerate(lines[1:]):
        cells = line.split(",")
        if len(cells) != expected_cols:
            raise DataFormatError(
                f"row {fi}: expected {expected_cols} columns, got {len(cells)}"
            )
        timestamps.append(float(cells[0]))
        for ji in range(n_joints):
            base = 1 + ji * 8
            positions[fi, ji] = [float(v) for v in cells[base : base + 3]]
            quats[fi, ji] = [float(v) for v in cells[base + 3 : base + 7]]
            status = cells[base + 7]
            if status not in ("0", "1", "2"):
                raise DataFormatError(
                    f"row {fi}, joint '{names[ji]}': bad tracking status {status!r}"
                )
            statuses[fi, ji] = int(status)
    try:
        return MotionSequence.from_arrays(topo, timestamps, positions, quats, statuses)
    except ValueError as e:
        raise DataFormatError(str(e)) from e


# ---------------------------------------------------------------------------
# synthetic gait

CHAIN_PHASE_LAG = 0.25  # radians between successive joints along a limb
HARMONIC_WEIGHT = 0.35
HARMONIC_PHASE = 0.8
ROTATION_SWING = 0.15  # radians of Z-axis oscillation on limb joints
ARM_DIRECTION = np.array([0.0, 0.25, 0.97])
LEG_DIRECTION = np.array([0.0, 0.30, 0.95])
_NOISE_TAPS = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


@dataclass(frozen=True)
class SynthSpec:
    """Deterministic gait-synthesis parameters.

    Arms swing as two-harmonic sinusoids of the gait phase; each leg joint
    replays the contralateral arm waveform delayed by ``phase_lag``, plus
    band-limited Gaussian noise with per-sample standard deviation
    ``noise_sigma``. The arm->leg map is therefore affine and known in
    closed form (:func:`gait_closed_form`).
    """

    frames: int
    rate: float = 30.0
    arm_frequency: float = 0.9
    phase_lag: float = CHAIN_PHASE_LAG
    amplitudes: dict = field(default_factory=dict)
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.frames < 1:
            raise DataFormatError("frames must be >= 1")
        if self.rate <= 0:
            raise DataFormatError("sample rate must be positive")
        if self.noise_sigma < 0:
            raise DataFormatError("noise sigma must be >= 0")

    def amplitude_map(self) -> dict:
        amps = skeleton.default_amplitudes()
        amps.update(self.amplitudes)
        return amps


def _waveform_row(phase: float, side_phase: float) -> np.ndarray:
    """Coefficients of sin/cos/sin2/cos2 for h(theta + phase) on one side."""
    return np.array(
        [
            math.cos(phase + side_phase),
            math.sin(phase + side_phase),
            HARMONIC_WEIGHT * math.cos(2.0 * phase + HARMONIC_PHASE),
            HARMONIC_WEIGHT * math.sin(2.0 * phase + HARMONIC_PHASE),
        ]
    )


def _basis(theta: np.ndarray) -> np.ndarray:
    return np.stack(
        [np.sin(theta), np.cos(theta), np.sin(2 * theta), np.cos(2 * theta)], axis=1
    )


_SIDE_PHASE = {"l": 0.0, "r": math.pi}


def _limb_rows(joints, chain, phase_lag, amps, direction, contralateral):
    """(3J, 4) waveform-coefficient matrix, joint-major then xyz."""
    rows = []
    for name in joints:
        kind, side = name.rsplit("_", 1)
        idx = chain.index(kind)
        wave_side = {"l": "r", "r": "l"}[side] if contralateral else side
        row = _waveform_row(CHAIN_PHASE_LAG * idx + (phase_lag if contralateral else 0.0),
                            _SIDE_PHASE[wave_side])
        for c in range(3):
            rows.append(amps[name] * direction[c] * row)
    return np.array(rows)


def _smooth_noise(rng: np.random.Generator, shape, sigma: float) -> np.ndarray:
    """Band-limited Gaussian noise, per-sample standard deviation sigma."""
    t = shape[0]
    white = rng.standard_normal((t + len(_NOISE_TAPS) - 1,) + shape[1:])
    windows = np.lib.stride_tricks.sliding_window_view(white, len(_NOISE_TAPS), axis=0)
    smooth = windows @ _NOISE_TAPS
    return sigma * smooth / math.sqrt(float(np.sum(_NOISE_TAPS**2)))


def gait_closed_form(spec: SynthSpec):
    """Exact affine arm->leg map of the generator: legs = W @ arms + c.

    Arm and leg vectors are flattened joint-major (left limb joints then
    right, xyz per joint) following ``skeleton.ARM_JOINTS`` and
    ``skeleton.LEG_JOINTS``.
    """
    amps = spec.amplitude_map()
    m_arm = _limb_rows(skeleton.ARM_JOINTS, skeleton.ARM_CHAIN, 0.0, amps,
                       ARM_DIRECTION, contralateral=False)
    m_leg = _limb_rows(skeleton.LEG_JOINTS, skeleton.LEG_CHAIN, spec.phase_lag, amps,
                       LEG_DIRECTION, contralateral=True)
    rest = skeleton.rest_pose()
    rest_arm = np.concatenate([rest[j] for j in skeleton.ARM_JOINTS])
    rest_leg = np.concatenate([rest[j] for j in skeleton.LEG_JOINTS])
    w = m_leg @ np.linalg.pinv(m_arm)
    c = rest_leg - w @ rest_arm
    return w, c


def synthesize_gait(spec: SynthSpec) -> MotionSequence:
    """Deterministic walking-like sequence on the default skeleton."""
    topo = skeleton.default_topology()
    rest = skeleton.rest_pose()
    amps = spec.amplitude_map()
    rng = np.random.default_rng(spec.seed)

    t = np.arange(spec.frames) / spec.rate
    theta = 2.0 * math.pi * spec.arm_frequency * t
    basis = _basis(theta)  # (T, 4)

    m_arm = _limb_rows(skeleton.ARM_JOINTS, skeleton.ARM_CHAIN, 0.0, amps,
                       ARM_DIRECTION, contralateral=False)
    m_leg = _limb_rows(skeleton.LEG_JOINTS, skeleton.LEG_CHAIN, spec.phase_lag, amps,
                       LEG_DIRECTION, contralateral=True)

    n_joints = topo.joint_count
    positions = np.empty((spec.frames, n_joints, 3))
    quats = np.zeros((spec.frames, n_joints, 4))
    quats[:, :, 0] = 1.0
    for ji, name in enumerate(topo.joint_names):
        positions[:, ji, :] = rest[name]

    arm_traj = basis @ m_arm.T  # (T, 54) displacement
    leg_traj = basis @ m_leg.T
    if spec.noise_sigma > 0:
        leg_traj = leg_traj + _smooth_noise(
            rng, leg_traj.shape, spec.noise_sigma
        )

    for k, name in enumerate(skeleton.ARM_JOINTS):
        ji = topo.index_of(name)
        positions[:, ji, :] += arm_traj[:, 3 * k : 3 * k + 3]
    for k, name in enumerate(skeleton.LEG_JOINTS):
        ji = topo.index_of(name)
        positions[:, ji, :] += leg_traj[:, 3 * k : 3 * k + 3]

    # small Z-axis rotation swing on limb joints, identity elsewhere
    for joints, mat in ((skeleton.ARM_JOINTS, m_arm), (skeleton.LEG_JOINTS, m_leg)):
        for k, name in enumerate(joints):
            ji = topo.index_of(name)
            row = mat[3 * k + 2] / max(abs(mat[3 * k + 2]).max(), 1e-12)
            angle = ROTATION_SWING * (basis @ row)
            quats[:, ji, 0] = np.cos(angle / 2.0)
            quats[:, ji, 3] = np.sin(angle / 2.0)

    statuses = np.full((spec.frames, n_joints), int(TrackingStatus.OBSERVABLE))
    return MotionSequence.from_arrays(topo, t, positions, quats, statuses)
