"""rcnkit: composable reservoir computing on numpy and scipy.

The package splits reservoir models into three reusable stages: random
input projections (``InputToNode``), leaky recurrent state updates
(``NodeToNode``), and an incrementally trainable ridge readout whose memory
does not grow with the number of samples. ELM and ESN estimators wire the
stages together for regression and (sequence) classification, and the
model-selection module runs sequential multi-step hyperparameter searches.
"""

from .blocks import (
    Cascade,
    InputToNode,
    NodeToNode,
    Parallel,
    PredefinedInputToNode,
    PredefinedNodeToNode,
    SparseWeights,
    SpectralRadiusError,
    compose,
    make_predefined,
    spectral_radius,
)
from .core import (
    ACTIVATIONS,
    RNG_ALGORITHM,
    MinMaxScaler,
    SequenceDataset,
    apply_activation,
    make_rng,
    read_csv,
    write_csv,
)
from .datasets import (
    MackeyGlassConfig,
    VolatilityFold,
    har_features,
    load_digits,
    mackey_glass,
    shift_target,
    volatility_folds,
)
from .estimators import (
    ElmClassifier,
    ElmRegressor,
    EsnClassifier,
    EsnRegressor,
    LabelEncoding,
    aggregate_outputs,
    project,
)
from .metrics import MetricValue, accuracy, mse, r2, sequence_metric
from .model_io import load_model, save_model
from .model_selection import (
    Choice,
    KFold,
    LogUniform,
    PredefinedSplit,
    Scorer,
    SearchResult,
    SearchStep,
    TimeSeriesSplit,
    Uniform,
    cross_validate,
    run_search,
)
from .readout import Readout, RidgeAccumulator

__version__ = "0.1.0"

__all__ = [
    "ACTIVATIONS",
    "RNG_ALGORITHM",
    "MinMaxScaler",
    "SequenceDataset",
    "apply_activation",
    "make_rng",
    "read_csv",
    "write_csv",
    "Cascade",
    "InputToNode",
    "NodeToNode",
    "Parallel",
    "PredefinedInputToNode",
    "PredefinedNodeToNode",
    "SparseWeights",
    "SpectralRadiusError",
    "compose",
    "make_predefined",
    "spectral_radius",
    "Readout",
    "RidgeAccumulator",
    "ElmClassifier",
    "ElmRegressor",
    "EsnClassifier",
    "EsnRegressor",
    "LabelEncoding",
    "aggregate_outputs",
    "project",
    "MetricValue",
    "accuracy",
    "mse",
    "r2",
    "sequence_metric",
    "Choice",
    "KFold",
    "LogUniform",
    "PredefinedSplit",
    "Scorer",
    "SearchResult",
    "SearchStep",
    "TimeSeriesSplit",
    "Uniform",
    "cross_validate",
    "run_search",
    "MackeyGlassConfig",
    "VolatilityFold",
    "har_features",
    "load_digits",
    "mackey_glass",
    "shift_target",
    "volatility_folds",
    "load_model",
    "save_model",
]
