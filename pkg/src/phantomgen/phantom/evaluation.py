"""Test-set metrics and the architecture comparison bench."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from phantomgen.phantom.dataset import GaitDataset, destandardize
from phantomgen.phantom.models import ModelSpec, PhantomModel, build_model
from phantomgen.phantom.training import TrainReport, train

BENCH_WARMUP_STEPS = 100


class EvaluationError(ValueError):
    pass


def evaluate(model: PhantomModel, dataset: GaitDataset) -> dict:
    """Ground-truth error (summed squared error, standardized units), mean
    MSE, and per-joint RMSE in meters over the test split."""
    if dataset.n_test == 0:
        raise EvaluationError("test split is empty")
    pred = model.forward_standardized(dataset.test_x)
    diff = pred - dataset.test_y
    gte = float(np.sum(diff * diff))
    mse = float(np.mean(diff * diff))

    joints = model.spec.channels.target_joints
    st = model.stats
    pred_j = pred.reshape(len(pred), len(joints), 3)
    target_j = dataset.test_y.reshape(len(pred), len(joints), 3)
    pred_m = destandardize(pred_j, st.y_mean, st.y_scale)
    target_m = destandardize(target_j, st.y_mean, st.y_scale)
    sq = np.mean((pred_m - target_m) ** 2, axis=(0, 2))
    per_joint = {j: float(np.sqrt(v)) for j, v in zip(joints, sq)}
    return {"ground_truth_error": gte, "mse": mse, "per_joint_rmse": per_joint}


@dataclass
class BenchRow:
    kind: str
    median_step_us: float
    time_1k_epochs_s: float
    convergence_epoch: Optional[int]
    ground_truth_error: float


@dataclass
class BenchReport:
    rows: list

    def to_csv(self) -> str:
        lines = [
            "architecture,step_us,time_1k_epochs_s,convergence_epoch,ground_truth_error"
        ]
        for r in self.rows:
            conv = "" if r.convergence_epoch is None else str(r.convergence_epoch)
            lines.append(
                f"{r.kind},{r.median_step_us:.3f},{r.time_1k_epochs_s:.3f},"
                f"{conv},{r.ground_truth_error:.6f}"
            )
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        head = (
            f"{'architecture':<14}{'step (us)':>12}{'1K epochs (s)':>16}"
            f"{'convergence':>14}{'gt error':>14}"
        )
        lines = [head, "-" * len(head)]
        for r in self.rows:
            conv = "-" if r.convergence_epoch is None else f"~{r.convergence_epoch}"
            lines.append(
                f"{r.kind:<14}{r.median_step_us:>12.1f}{r.time_1k_epochs_s:>16.2f}"
                f"{conv:>14}{r.ground_truth_error:>14.4f}"
            )
        return "\n".join(lines) + "\n"


def bench(
    specs: Sequence[ModelSpec],
    dataset: GaitDataset,
    epochs: int,
    batch_size: int = 32,
    lr: float = 1e-3,
    warmup: int = BENCH_WARMUP_STEPS,
    threads: int = 1,
) -> "tuple[BenchReport, list]":
    """Train each architecture fresh on the same data and tabulate timing,
    convergence and test error. Returns the report plus (model, report)
    pairs for reuse."""
    if len(specs) < 2:
        raise EvaluationError("bench needs at least 2 models to compare")
    rows = []
    trained = []
    for spec in specs:
        model = build_model(spec)
        report = train(
            model, dataset, epochs=epochs, batch_size=batch_size, lr=lr, threads=threads
        )
        metrics = evaluate(model, dataset)
        steps_per_epoch = report.steps_per_epoch
        median_us = report.median_step_us(warmup=warmup)
        if not np.isfinite(median_us):
            median_us = report.median_step_us()
        rows.append(
            BenchRow(
                kind=spec.kind,
                median_step_us=median_us,
                time_1k_epochs_s=median_us * 1e-6 * steps_per_epoch * 1000.0,
                convergence_epoch=report.convergence_epoch,
                ground_truth_error=metrics["ground_truth_error"],
            )
        )
        trained.append((model, report))
    return BenchReport(rows), trained
