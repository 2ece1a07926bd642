"""Subsystem partitioning from joint-motion correlation.

The body is split into mechanically coupled joint groups by agglomerative
clustering of a speed-correlation graph; pipeline wiring then connects
input groups to output groups either one-to-one (single correlation) or
all-to-all (double correlation).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from phantomgen.kinematics import MotionSequence


class MusculoError(ValueError):
    pass


@dataclass(frozen=True)
class CorrelationGraph:
    """Symmetric joint-correlation matrix with unit diagonal."""

    joint_ids: tuple
    weights: np.ndarray

    def __post_init__(self):
        ids = tuple(self.joint_ids)
        w = np.asarray(self.weights, dtype=float)
        n = len(ids)
        if w.shape != (n, n):
            raise MusculoError(f"weights must be {n}x{n}, got {w.shape}")
        if not np.allclose(w, w.T, atol=1e-12):
            raise MusculoError("weights must be symmetric")
        if not np.all(np.diag(w) == 1.0):
            raise MusculoError("diagonal must be exactly 1")
        if np.any(np.abs(w) > 1.0 + 1e-12):
            raise MusculoError("weights must lie in [-1, 1]")
        w = 0.5 * (w + w.T)
        np.fill_diagonal(w, 1.0)
        w.flags.writeable = False
        object.__setattr__(self, "joint_ids", ids)
        object.__setattr__(self, "weights", w)

    @property
    def joint_count(self) -> int:
        return len(self.joint_ids)


@dataclass(frozen=True)
class SubsystemPartition:
    """Disjoint joint groups plus (input subsystem, output subsystem) wiring."""

    joint_ids: tuple
    subsystems: tuple  # tuple of frozensets of joint ids
    wiring: tuple = ()  # tuple of (input subsystem index, output subsystem index)

    def __post_init__(self):
        ids = tuple(self.joint_ids)
        subs = tuple(frozenset(s) for s in self.subsystems)
        seen: set = set()
        for s in subs:
            if s & seen:
                raise MusculoError("subsystems must be disjoint")
            seen |= s
        if seen != set(ids):
            raise MusculoError("subsystems must cover exactly the declared joints")
        wiring = tuple((int(a), int(b)) for a, b in self.wiring)
        for a, b in wiring:
            if not (0 <= a < len(subs) and 0 <= b < len(subs)):
                raise MusculoError(f"wiring ({a}, {b}) references a missing subsystem")
        object.__setattr__(self, "joint_ids", ids)
        object.__setattr__(self, "subsystems", subs)
        object.__setattr__(self, "wiring", wiring)

    def subsystem_members(self, index: int) -> list:
        """Members of one subsystem in declared joint order."""
        s = self.subsystems[index]
        return [j for j in self.joint_ids if j in s]

    def as_sets(self) -> set:
        return {frozenset(s) for s in self.subsystems}


def joint_speeds(seq: MotionSequence) -> np.ndarray:
    """(T-1, J) per-joint speed series ||dp||/dt."""
    pos = seq.positions()
    ts = seq.timestamps()
    dp = np.diff(pos, axis=0)
    dt = np.diff(ts)[:, None]
    return np.linalg.norm(dp, axis=2) / dt


def correlation_from_motion(seq: MotionSequence) -> CorrelationGraph:
    """Pearson correlation of per-joint speed series.

    Joints with zero speed variance get 0 off-diagonal correlation.
    """
    if len(seq) < 2:
        raise MusculoError("need at least 2 frames to compute speeds")
    speeds = joint_speeds(seq)
    n = speeds.shape[1]
    centered = speeds - speeds.mean(axis=0)
    std = centered.std(axis=0)
    w = np.zeros((n, n))
    live = std > 0
    if live.any():
        sub = centered[:, live] / std[live]
        c = (sub.T @ sub) / len(sub)
        c = np.clip(c, -1.0, 1.0)
        w[np.ix_(live, live)] = c
    np.fill_diagonal(w, 1.0)
    return CorrelationGraph(tuple(seq.topology.joint_names), w)


def hierarchical_cluster(g: CorrelationGraph, k: int) -> SubsystemPartition:
    """Average-linkage agglomerative clustering on distance 1 - |corr|.

    Merges the pair with the lowest mean pairwise distance until ``k``
    clusters remain; ties break toward the pair with the lowest member
    joint indices, so the result is deterministic and permutation-stable.
    """
    n = g.joint_count
    if not 1 <= k <= n:
        raise MusculoError(f"k must be in [1, {n}], got {k}")
    dist = 1.0 - np.abs(g.weights)
    clusters: list = [[i] for i in range(n)]  # each kept sorted, so [0] is the min member
    while len(clusters) > k:
        best_key, best_pair = None, None
        for a in range(len(clusters) - 1):
            for b in range(a + 1, len(clusters)):
                d = float(dist[np.ix_(clusters[a], clusters[b])].mean())
                lo, hi = sorted((clusters[a][0], clusters[b][0]))
                key = (d, lo, hi)
                if best_key is None or key < best_key:
                    best_key, best_pair = key, (a, b)
        a, b = best_pair
        clusters[a] = sorted(clusters[a] + clusters[b])
        del clusters[b]
    clusters.sort(key=min)
    ids = g.joint_ids
    subsystems = tuple(frozenset(ids[i] for i in c) for c in clusters)
    return SubsystemPartition(ids, subsystems)


def _subsystem_correlation(g: CorrelationGraph, a: Iterable, b: Iterable) -> float:
    """Mean absolute pairwise correlation between two joint groups."""
    index = {j: i for i, j in enumerate(g.joint_ids)}
    ia = [index[j] for j in a]
    ib = [index[j] for j in b]
    return float(np.abs(g.weights[np.ix_(ia, ib)]).mean())


def derive_wiring(
    p: SubsystemPartition,
    inputs: Iterable,
    outputs: Iterable,
    multi: bool,
    graph: "CorrelationGraph | None" = None,
) -> SubsystemPartition:
    """Wire output subsystems to input subsystems.

    ``multi=False`` connects each output subsystem to its single most
    correlated input subsystem (requires ``graph``); ``multi=True``
    connects every output subsystem to every input subsystem.
    """
    inputs = set(inputs)
    outputs = set(outputs)
    covered = set().union(*p.subsystems) if p.subsystems else set()
    if not inputs <= covered or not outputs <= covered:
        raise MusculoError("inputs/outputs must be covered by the partition")
    in_subs = [i for i, s in enumerate(p.subsystems) if s & inputs]
    out_subs = [i for i, s in enumerate(p.subsystems) if s & outputs]
    for i in out_subs:
        if p.subsystems[i] & inputs:
            raise MusculoError(
                f"subsystem {i} contains both input and output joints"
            )
    if multi:
        wiring = tuple((i, o) for o in out_subs for i in in_subs)
    else:
        if graph is None:
            raise MusculoError("single-correlation wiring needs the correlation graph")
        wiring = []
        for o in out_subs:
            scores = [
                (-_subsystem_correlation(graph, p.subsystems[i], p.subsystems[o]), i)
                for i in in_subs
            ]
            wiring.append((min(scores)[1], o))
        wiring = tuple(wiring)
    return SubsystemPartition(p.joint_ids, p.subsystems, wiring)
