"""Divisive clustering of functional data by gap-statistic splits on
trajectories and derivatives, revised with functional boxplots."""

__version__ = "0.1.0"

from .curves import (FeatureStack, SampledCurveSet, read_curves_csv,  # noqa: E402
                     write_curves_csv)
from .engine import ClusterTree, EngineParams, run_seqclusfd  # noqa: E402
from .errors import (DataError, NumericError, ParameterError,  # noqa: E402
                     SeqClusError)
from .evaluation import ccr, merge_labels, run_benchmark  # noqa: E402
from .generators import GeneratorSpec, generate  # noqa: E402
from .smoothing import SmoothingConfig, prepare_features  # noqa: E402

__all__ = [
    "SampledCurveSet", "FeatureStack", "read_curves_csv", "write_curves_csv",
    "SmoothingConfig", "prepare_features",
    "EngineParams", "ClusterTree", "run_seqclusfd",
    "GeneratorSpec", "generate",
    "ccr", "merge_labels", "run_benchmark",
    "SeqClusError", "ParameterError", "DataError", "NumericError",
]
