"""Mini-batch training of phantom models, pipeline by pipeline."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from phantomgen.neuralcore.optim import make_optimizer
from phantomgen.phantom.dataset import GaitDataset
from phantomgen.phantom.models import MLP_WEIGHT_DECAY, PhantomModel

DEFAULT_BATCH_SIZE = 32
DEFAULT_EPOCHS = 1000
CONVERGENCE_WINDOW = 50
CONVERGENCE_IMPROVEMENT = 0.01


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; the model keeps its last finite epoch state."""

    def __init__(self, message: str, report: "TrainReport"):
        super().__init__(message)
        self.report = report


@dataclass
class TrainReport:
    """Per-epoch losses, the convergence epoch and wall-time accounting."""

    epochs: int
    steps_per_epoch: int
    epoch_losses: list = field(default_factory=list)
    pipeline_losses: list = field(default_factory=list)  # one list per pipeline
    convergence_epoch: Optional[int] = None
    step_times_us: np.ndarray = field(default_factory=lambda: np.zeros(0))
    total_wall_s: float = 0.0
    aborted_epoch: Optional[int] = None

    @property
    def steps(self) -> int:
        return len(self.epoch_losses) * self.steps_per_epoch

    def median_step_us(self, warmup: int = 0) -> float:
        times = self.step_times_us[warmup:]
        if len(times) == 0:
            return float("nan")
        return float(np.median(times))

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "epochs": self.epochs,
            "steps_per_epoch": self.steps_per_epoch,
            "epoch_losses": [float(v) for v in self.epoch_losses],
            "pipeline_losses": [[float(v) for v in hist] for hist in self.pipeline_losses],
            "convergence_epoch": self.convergence_epoch,
            "aborted_epoch": self.aborted_epoch,
        }
        if include_timing:
            out["median_step_us"] = self.median_step_us()
            out["total_wall_s"] = self.total_wall_s
        return out


def convergence_epoch(losses, window: int = CONVERGENCE_WINDOW,
                      threshold: float = CONVERGENCE_IMPROVEMENT) -> Optional[int]:
    """First epoch (1-indexed) whose improvement over the last ``window``
    epochs falls below ``threshold`` (relative)."""
    for e in range(window, len(losses)):
        past = losses[e - window]
        if past <= 0:
            return e + 1
        if (past - losses[e]) / past < threshold:
            return e + 1
    return None


def _pipeline_optimizer(model: PhantomModel, pipeline, kind: str, lr: float):
    weight_decay = MLP_WEIGHT_DECAY if model.spec.kind == "mlp" else 0.0
    mask = [pipeline.network.weight_decay_mask()]
    return make_optimizer(kind, lr, weight_decay=weight_decay, decay_mask=mask)


def _train_one_pipeline(pipeline, train_x, train_y, epochs, batch_size, optimizer):
    """Full training loop for one pipeline; returns (losses, step_times_s)."""
    net = pipeline.network
    rng = pipeline.train_rng()
    x = pipeline.slice_input(train_x)
    y = pipeline.slice_target(train_y)
    n = len(x)
    losses = []
    step_times = []
    for epoch in range(epochs):
        snapshot = [arr.copy() for arr in net.parameter_arrays()]
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            sel = perm[start : start + batch_size]
            xb = np.ascontiguousarray(x[sel])
            yb = np.ascontiguousarray(y[sel])
            t0 = time.perf_counter()
            loss = net.train_step(xb, yb, optimizer, rng=rng)
            step_times.append(time.perf_counter() - t0)
            total += loss * len(sel)
        epoch_loss = total / n
        if not math.isfinite(epoch_loss):
            net.set_parameters(snapshot)
            losses.append(float("nan"))
            return losses, step_times
        losses.append(epoch_loss)
    return losses, step_times


def train(
    model: PhantomModel,
    dataset: GaitDataset,
    epochs: int = DEFAULT_EPOCHS,
    batch_size: int = DEFAULT_BATCH_SIZE,
    optimizer: str = "adam",
    lr: float = 1e-3,
    threads: int = 1,
) -> TrainReport:
    """Train every pipeline on its wired slices; deterministic for threads=1
    (and for any thread count, since pipelines share no state)."""
    if dataset.n_train == 0:
        raise ValueError("training split is empty")
    model.stats = dataset.stats
    steps_per_epoch = math.ceil(dataset.n_train / batch_size)
    report = TrainReport(epochs=epochs, steps_per_epoch=steps_per_epoch)
    if epochs == 0:
        return report

    t_start = time.perf_counter()
    optimizers = [
        _pipeline_optimizer(model, p, optimizer, lr) for p in model.pipelines
    ]
    jobs = [
        (p, dataset.train_x, dataset.train_y, epochs, batch_size, opt)
        for p, opt in zip(model.pipelines, optimizers)
    ]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda args: _train_one_pipeline(*args), jobs))
    else:
        results = [_train_one_pipeline(*args) for args in jobs]
    report.total_wall_s = time.perf_counter() - t_start

    losses_per_pipe = [r[0] for r in results]
    report.pipeline_losses = losses_per_pipe

    # scalar-count weighted combination across pipelines
    weights = np.array(
        [len(p.output_rows) * model.spec.output_channels for p in model.pipelines],
        dtype=float,
    )
    weights /= weights.sum()
    n_epochs_done = min(len(h) for h in losses_per_pipe)
    combined = [
        float(sum(w * h[e] for w, h in zip(weights, losses_per_pipe)))
        for e in range(n_epochs_done)
    ]
    report.epoch_losses = combined

    # per-model step time = the same-index step summed across pipelines
    per_pipe_times = [np.asarray(r[1]) for r in results]
    n_steps = min(len(t) for t in per_pipe_times)
    if n_steps:
        report.step_times_us = 1e6 * np.sum(
            [t[:n_steps] for t in per_pipe_times], axis=0
        )

    diverged = any(not math.isfinite(h[-1]) for h in losses_per_pipe if h)
    if diverged:
        report.aborted_epoch = n_epochs_done
        report.epoch_losses = [v for v in combined if math.isfinite(v)]
        report.convergence_epoch = convergence_epoch(report.epoch_losses)
        raise TrainingDiverged(
            f"loss became non-finite at epoch {n_epochs_done}; "
            "parameters restored to the last finite epoch",
            report,
        )
    report.convergence_epoch = convergence_epoch(combined)
    return report
