"""Architecture assembly, training, streaming generation and evaluation."""

from phantomgen.phantom.bundle import BundleError, load_bundle, save_bundle
from phantomgen.phantom.dataset import (
    DatasetError,
    GaitDataset,
    destandardize,
    make_dataset,
    standardize,
)
from phantomgen.phantom.evaluation import (
    BenchReport,
    BenchRow,
    EvaluationError,
    bench,
    evaluate,
)
from phantomgen.phantom.models import (
    ChannelSet,
    ModelConfigError,
    ModelSpec,
    NormalizationStats,
    PhantomModel,
    build_model,
    default_channels,
    default_partition,
)
from phantomgen.phantom.streaming import (
    GeneratedFrame,
    InputFrame,
    StreamStats,
    generate_stream,
)
from phantomgen.phantom.training import (
    TrainReport,
    TrainingDiverged,
    convergence_epoch,
    train,
)

__all__ = [
    "BenchReport",
    "BenchRow",
    "BundleError",
    "ChannelSet",
    "DatasetError",
    "EvaluationError",
    "GaitDataset",
    "GeneratedFrame",
    "InputFrame",
    "ModelConfigError",
    "ModelSpec",
    "NormalizationStats",
    "PhantomModel",
    "StreamStats",
    "TrainReport",
    "TrainingDiverged",
    "bench",
    "build_model",
    "convergence_epoch",
    "default_channels",
    "default_partition",
    "destandardize",
    "evaluate",
    "generate_stream",
    "load_bundle",
    "make_dataset",
    "save_bundle",
    "standardize",
    "train",
]
