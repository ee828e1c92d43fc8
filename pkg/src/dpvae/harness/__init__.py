from .checkpoint import Checkpoint, CheckpointError
from .config import ConfigError, NumericAbort, TrainConfig, build_model, load_data, stream
from .reporting import MetricReport, MetricSpec, evaluate, factor_traverse, generate, latent_traverse, traversal_path
from .training import RunLog, train

__all__ = [
    "Checkpoint",
    "CheckpointError",
    "ConfigError",
    "MetricReport",
    "MetricSpec",
    "NumericAbort",
    "RunLog",
    "TrainConfig",
    "build_model",
    "evaluate",
    "factor_traverse",
    "generate",
    "latent_traverse",
    "load_data",
    "stream",
    "train",
    "traversal_path",
]
