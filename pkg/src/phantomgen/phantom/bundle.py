"""Model bundle persistence.

A bundle is a directory::

    spec.json            architecture description
    stats.json           input/output normalization statistics
    pipeline_<i>.params  one PHNN binary per pipeline
    report.json          training report (written by the trainer, optional)
"""

from __future__ import annotations

import json
import os
from typing import Optional

import numpy as np

from phantomgen.neuralcore.params_io import (
    load_params,
    load_into_network,
    network_layer_params,
    save_params,
)
from phantomgen.phantom.models import (
    ModelSpec,
    NormalizationStats,
    PhantomModel,
    build_model,
    spec_from_json,
    spec_to_json,
)
from phantomgen.phantom.training import TrainReport


class BundleError(ValueError):
    pass


def _stats_to_dict(stats: NormalizationStats) -> dict:
    return {
        "x_mean": stats.x_mean.tolist(),
        "x_scale": stats.x_scale.tolist(),
        "y_mean": stats.y_mean.tolist(),
        "y_scale": stats.y_scale.tolist(),
    }


def _stats_from_dict(d: dict) -> NormalizationStats:
    stats = NormalizationStats(
        np.array(d["x_mean"]),
        np.array(d["x_scale"]),
        np.array(d["y_mean"]),
        np.array(d["y_scale"]),
    )
    stats.validate()
    return stats


def save_bundle(
    path: str,
    model: PhantomModel,
    report: Optional[TrainReport] = None,
    include_timing: bool = False,
):
    if model.stats is None:
        raise BundleError("model has no normalization statistics; train it first")
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "spec.json"), "w") as fh:
        fh.write(spec_to_json(model.spec))
        fh.write("\n")
    with open(os.path.join(path, "stats.json"), "w") as fh:
        json.dump(_stats_to_dict(model.stats), fh, sort_keys=True, indent=2)
        fh.write("\n")
    for i, pipeline in enumerate(model.pipelines):
        save_params(
            os.path.join(path, f"pipeline_{i}.params"),
            network_layer_params(pipeline.network),
        )
    if report is not None:
        with open(os.path.join(path, "report.json"), "w") as fh:
            json.dump(report.to_dict(include_timing=include_timing), fh, sort_keys=True, indent=2)
            fh.write("\n")


def load_bundle(path: str) -> PhantomModel:
    spec_path = os.path.join(path, "spec.json")
    if not os.path.isfile(spec_path):
        raise BundleError(f"no spec.json in {path!r}; not a model bundle")
    with open(spec_path) as fh:
        spec: ModelSpec = spec_from_json(fh.read())
    model = build_model(spec)
    with open(os.path.join(path, "stats.json")) as fh:
        model.stats = _stats_from_dict(json.load(fh))
    for i, pipeline in enumerate(model.pipelines):
        params_path = os.path.join(path, f"pipeline_{i}.params")
        if not os.path.isfile(params_path):
            raise BundleError(f"bundle is missing {params_path!r}")
        load_into_network(pipeline.network, load_params(params_path))
    return model
