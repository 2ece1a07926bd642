"""The four trainable architectures and their assembly into pipelines.

Every architecture is expressed as one or more *pipelines*: a pipeline
owns a network, the input-joint indices it reads, and the target rows it
predicts. The single-pipeline kinds (mlp, dae) read every input joint and
predict the whole target; the hierarchical kinds split input and target
into per-subsystem slices, and vhnn4 additionally averages the two
pipelines that feed each output subsystem.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from phantomgen import skeleton
from phantomgen.musculo import SubsystemPartition
from phantomgen.neuralcore import LayerSpec, Network

MODEL_KINDS = ("mlp", "dae", "vhnn2", "vhnn4")
OUTPUT_MODES = ("channels", "literal")
HIDDEN_ACTIVATIONS = ("relu", "linear")

MLP_HIDDEN_LAYERS = 7
MLP_HIDDEN_UNITS = 18
MLP_WEIGHT_DECAY = 1e-4
CONV_FILTERS = 32
CONV_KERNEL = 3


class ModelConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelSet:
    """Enabled input channels (joint groups) and the disabled target channel."""

    input_groups: tuple  # ((name, (joint, ...)), ...)
    target_joints: tuple

    def __post_init__(self):
        groups = tuple((str(n), tuple(j)) for n, j in self.input_groups)
        target = tuple(self.target_joints)
        inputs = [j for _, joints in groups for j in joints]
        if len(set(inputs)) != len(inputs):
            raise ModelConfigError("input channels must not repeat joints")
        if set(inputs) & set(target):
            raise ModelConfigError("input and target joint sets must be disjoint")
        if not inputs or not target:
            raise ModelConfigError("input and target channels must be non-empty")
        object.__setattr__(self, "input_groups", groups)
        object.__setattr__(self, "target_joints", target)

    @property
    def input_joints(self) -> tuple:
        return tuple(j for _, joints in self.input_groups for j in joints)

    def to_dict(self) -> dict:
        return {
            "input_groups": [{"name": n, "joints": list(j)} for n, j in self.input_groups],
            "target_joints": list(self.target_joints),
        }

    @staticmethod
    def from_dict(d: dict) -> "ChannelSet":
        return ChannelSet(
            tuple((g["name"], tuple(g["joints"])) for g in d["input_groups"]),
            tuple(d["target_joints"]),
        )


def default_channels(output_mode: str = "channels") -> ChannelSet:
    """Upper-limb inputs (shoulder/elbow/wrist groups) and lower-limb targets."""
    target = skeleton.LEG_JOINTS if output_mode == "channels" else skeleton.PRIMARY_LEG_JOINTS
    return ChannelSet(
        (
            ("shoulders", skeleton.SHOULDER_GROUP),
            ("elbows", skeleton.ELBOW_GROUP),
            ("wrists", skeleton.WRIST_GROUP),
        ),
        target,
    )


def _split_by_side(joints) -> "tuple[tuple, tuple]":
    left = tuple(j for j in joints if j.endswith("_l"))
    right = tuple(j for j in joints if j.endswith("_r"))
    if set(left) | set(right) != set(joints):
        raise ModelConfigError(
            "cannot infer left/right subsystems from joint names; pass a partition"
        )
    return left, right


def default_partition(channels: ChannelSet, kind: str) -> SubsystemPartition:
    """Left/right split with one-to-one (vhnn2) or all-pairs (vhnn4) wiring."""
    in_l, in_r = _split_by_side(channels.input_joints)
    out_l, out_r = _split_by_side(channels.target_joints)
    subsystems = (frozenset(in_l), frozenset(in_r), frozenset(out_l), frozenset(out_r))
    wiring = ((0, 2), (1, 3)) if kind == "vhnn2" else ((0, 2), (1, 3), (0, 3), (1, 2))
    return SubsystemPartition(
        channels.input_joints + channels.target_joints, subsystems, wiring
    )


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of one architecture instance."""

    kind: str
    channels: ChannelSet
    partition: Optional[SubsystemPartition] = None
    hidden_activation: str = "relu"
    output_mode: str = "channels"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ModelConfigError(f"unknown model kind {self.kind!r}")
        if self.output_mode not in OUTPUT_MODES:
            raise ModelConfigError(f"unknown output mode {self.output_mode!r}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ModelConfigError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.kind in ("vhnn2", "vhnn4"):
            partition = self.partition or default_partition(self.channels, self.kind)
            _validate_partition(self.kind, partition, self.channels)
            object.__setattr__(self, "partition", partition)

    @property
    def output_channels(self) -> int:
        return 3 if self.output_mode == "channels" else 1

    @property
    def target_rows(self) -> int:
        n = len(self.channels.target_joints)
        return n if self.output_mode == "channels" else 3 * n

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "channels": self.channels.to_dict(),
            "hidden_activation": self.hidden_activation,
            "output_mode": self.output_mode,
            "seed": self.seed,
        }
        if self.partition is not None:
            out["partition"] = {
                "joint_ids": list(self.partition.joint_ids),
                "subsystems": [sorted(s) for s in self.partition.subsystems],
                "wiring": [list(w) for w in self.partition.wiring],
            }
        return out

    @staticmethod
    def from_dict(d: dict) -> "ModelSpec":
        partition = None
        if "partition" in d:
            p = d["partition"]
            partition = SubsystemPartition(
                tuple(p["joint_ids"]),
                tuple(frozenset(s) for s in p["subsystems"]),
                tuple(tuple(w) for w in p["wiring"]),
            )
        return ModelSpec(
            kind=d["kind"],
            channels=ChannelSet.from_dict(d["channels"]),
            partition=partition,
            hidden_activation=d.get("hidden_activation", "relu"),
            output_mode=d.get("output_mode", "channels"),
            seed=d.get("seed", 0),
        )


def _validate_partition(kind: str, partition: SubsystemPartition, channels: ChannelSet):
    inputs = set(channels.input_joints)
    targets = set(channels.target_joints)
    in_subs = [i for i, s in enumerate(partition.subsystems) if s & inputs]
    out_subs = [i for i, s in enumerate(partition.subsystems) if s & targets]
    for i in in_subs:
        if partition.subsystems[i] & targets:
            raise ModelConfigError(f"subsystem {i} mixes input and target joints")
    wires = set(partition.wiring)
    if kind == "vhnn2":
        if len(partition.wiring) != 2:
            raise ModelConfigError("vhnn2 needs exactly 2 pipelines")
        if len({w[0] for w in wires}) != 2 or len({w[1] for w in wires}) != 2:
            raise ModelConfigError("vhnn2 pipelines must be wired one-to-one")
    elif kind == "vhnn4":
        expected = {(i, o) for i in in_subs for o in out_subs}
        if len(in_subs) != 2 or len(out_subs) != 2 or wires != expected:
            raise ModelConfigError(
                "vhnn4 needs 4 pipelines realizing the full input x output wiring"
            )
    for i, o in wires:
        if not partition.subsystems[i] <= inputs:
            raise ModelConfigError(f"wire input subsystem {i} not covered by input channels")
        if not partition.subsystems[o] <= targets:
            raise ModelConfigError(f"wire output subsystem {o} not covered by the target channel")


# ---------------------------------------------------------------------------
# layer stacks


def dae_stack(hidden: str, out_filters: int):
    conv = dict(filters=CONV_FILTERS, kernel_size=CONV_KERNEL, activation=hidden)
    return [
        LayerSpec("Conv1D", **conv),
        LayerSpec("MaxPool1D", pool_size=3),
        LayerSpec("Conv1D", **conv),
        LayerSpec("MaxPool1D", pool_size=2),
        LayerSpec("Conv1D", **conv),
        LayerSpec("Upsample1D", upsample_size=2),
        LayerSpec("Conv1D", **conv),
        LayerSpec("Upsample1D", upsample_size=3),
        LayerSpec("Conv1D", filters=out_filters, kernel_size=CONV_KERNEL, activation="linear"),
    ]


def vhnn2_stack(hidden: str, out_filters: int):
    conv = dict(filters=CONV_FILTERS, kernel_size=CONV_KERNEL, activation=hidden)
    return [
        LayerSpec("Conv1D", **conv),
        LayerSpec("Dropout", rate=0.5),
        LayerSpec("MaxPool1D", pool_size=3),
        LayerSpec("Conv1D", **conv),
        LayerSpec("Upsample1D", upsample_size=3),
        LayerSpec("Conv1D", filters=out_filters, kernel_size=CONV_KERNEL, activation="linear"),
    ]


def vhnn4_stack(hidden: str, out_filters: int):
    conv = dict(filters=CONV_FILTERS, kernel_size=CONV_KERNEL, activation=hidden)
    return [
        LayerSpec("Conv1D", **conv),
        LayerSpec("Dropout", rate=0.5),
        LayerSpec("MaxPool1D", pool_size=3),
        LayerSpec("Conv1D", **conv),
        LayerSpec("Dropout", rate=0.2),
        LayerSpec("Upsample1D", upsample_size=3),
        LayerSpec("Conv1D", filters=out_filters, kernel_size=CONV_KERNEL, activation="linear"),
    ]


def mlp_stack(out_units: int):
    specs = [
        LayerSpec("Dense", units=MLP_HIDDEN_UNITS, activation="relu")
        for _ in range(MLP_HIDDEN_LAYERS)
    ]
    specs.append(LayerSpec("Dense", units=out_units, activation="linear"))
    return specs


# ---------------------------------------------------------------------------
# pipelines and the assembled model


@dataclass
class Pipeline:
    """One independently trainable network plus its input/output slices."""

    name: str
    network: Network
    input_indices: np.ndarray  # indices into the stacked input joints
    output_rows: np.ndarray  # rows of the target tensor this pipeline predicts
    flatten_input: bool = False
    seed_key: int = 0

    def slice_input(self, x: np.ndarray) -> np.ndarray:
        xi = x[:, self.input_indices, :]
        if self.flatten_input:
            return np.ascontiguousarray(xi.reshape(xi.shape[0], -1))
        return np.ascontiguousarray(xi)

    def slice_target(self, y: np.ndarray) -> np.ndarray:
        yi = y[:, self.output_rows, :]
        if self.flatten_input:
            return yi.reshape(yi.shape[0], -1)
        return np.ascontiguousarray(yi)

    def predict(self, x: np.ndarray) -> np.ndarray:
        out = self.network.forward(self.slice_input(x), train=False)
        if self.flatten_input:
            out = out.reshape(out.shape[0], len(self.output_rows), -1)
        return out

    def init_rng(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed_key, 0]))

    def train_rng(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed_key, 1]))


@dataclass
class NormalizationStats:
    """Per-feature standardization parameters (scale is always > 0)."""

    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: np.ndarray
    y_scale: np.ndarray

    def validate(self):
        for name in ("x_mean", "x_scale", "y_mean", "y_scale"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                raise ModelConfigError(f"{name} must be finite")
        if np.any(self.x_scale <= 0) or np.any(self.y_scale <= 0):
            raise ModelConfigError("scales must be positive")


@dataclass
class PhantomModel:
    spec: ModelSpec
    pipelines: list
    stats: Optional[NormalizationStats] = None

    @property
    def out_shape(self):
        return (self.spec.target_rows, self.spec.output_channels)

    def forward_standardized(self, x: np.ndarray) -> np.ndarray:
        """(B, J_in, 3) standardized input -> (B, rows, C) standardized output."""
        rows, chans = self.out_shape
        out = np.zeros((x.shape[0], rows, chans))
        counts = np.zeros(rows)
        for p in self.pipelines:
            out[:, p.output_rows, :] += p.predict(x)
            counts[p.output_rows] += 1.0
        return out / counts[None, :, None]

    def parameter_count(self) -> int:
        return sum(p.network.parameter_count() for p in self.pipelines)


def _pipeline_seed(spec_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([spec_seed, index]).generate_state(1)[0])


def _target_row_indices(spec: ModelSpec, joints) -> np.ndarray:
    order = {j: i for i, j in enumerate(spec.channels.target_joints)}
    joint_rows = [order[j] for j in joints]
    if spec.output_mode == "channels":
        return np.array(joint_rows, dtype=np.intp)
    rows = []
    for r in joint_rows:
        rows.extend((3 * r, 3 * r + 1, 3 * r + 2))
    return np.array(rows, dtype=np.intp)


def build_model(spec: ModelSpec) -> PhantomModel:
    """Instantiate networks for every pipeline of the requested architecture."""
    in_joints = spec.channels.input_joints
    in_index = {j: i for i, j in enumerate(in_joints)}
    out_f = spec.output_channels
    pipelines = []

    if spec.kind == "mlp":
        rows = spec.target_rows
        seed_key = _pipeline_seed(spec.seed, 0)
        net = Network(
            mlp_stack(rows * out_f),
            (len(in_joints) * 3,),
            np.random.default_rng(np.random.SeedSequence([seed_key, 0])),
        )
        pipelines.append(
            Pipeline(
                "mlp",
                net,
                np.arange(len(in_joints), dtype=np.intp),
                np.arange(rows, dtype=np.intp),
                flatten_input=True,
                seed_key=seed_key,
            )
        )
    elif spec.kind == "dae":
        seed_key = _pipeline_seed(spec.seed, 0)
        net = Network(
            dae_stack(spec.hidden_activation, out_f),
            (len(in_joints), 3),
            np.random.default_rng(np.random.SeedSequence([seed_key, 0])),
        )
        pipelines.append(
            Pipeline(
                "dae",
                net,
                np.arange(len(in_joints), dtype=np.intp),
                np.arange(spec.target_rows, dtype=np.intp),
                seed_key=seed_key,
            )
        )
    else:
        stack_fn = vhnn2_stack if spec.kind == "vhnn2" else vhnn4_stack
        partition = spec.partition
        for pi, (i_sub, o_sub) in enumerate(partition.wiring):
            in_members = partition.subsystem_members(i_sub)
            out_members = partition.subsystem_members(o_sub)
            seed_key = _pipeline_seed(spec.seed, pi)
            try:
                net = Network(
                    stack_fn(spec.hidden_activation, out_f),
                    (len(in_members), 3),
                    np.random.default_rng(np.random.SeedSequence([seed_key, 0])),
                )
            except ValueError as e:
                raise ModelConfigError(
                    f"pipeline {pi} (subsystems {i_sub}->{o_sub}): {e}"
                ) from e
            pipelines.append(
                Pipeline(
                    f"pipe{pi}_s{i_sub}_to_s{o_sub}",
                    net,
                    np.array([in_index[j] for j in in_members], dtype=np.intp),
                    _target_row_indices(spec, out_members),
                    seed_key=seed_key,
                )
            )
    return PhantomModel(spec, pipelines)


def spec_to_json(spec: ModelSpec) -> str:
    return json.dumps(spec.to_dict(), sort_keys=True, indent=2)


def spec_from_json(text: str) -> ModelSpec:
    return ModelSpec.from_dict(json.loads(text))
