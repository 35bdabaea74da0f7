"""Two-regime Markov-switching VAR(1) toolkit for real-financial cycle analysis."""

from .cycles import CycleDiagnosis, Verdict, classify_minsky, diagnose, is_significant
from .diagnostics import TestReport, df_test, ljung_box, regime_residuals
from .em import (
    EstimationConfig,
    EstimationResult,
    FilterOutput,
    estimate,
    hamilton_filter,
    kim_smoother,
    std_errors,
)
from .errors import (
    DataError,
    DegenerateCovarianceError,
    EstimationError,
    MinskyError,
    MonteCarloError,
    RegimeStarvationError,
    SmootherError,
    UnderflowError,
)
from .hp import HpConfig, hp_decompose
from .model import (
    Covariance2,
    MsVarModel,
    RegimeCoefficients,
    SeriesPair,
    TransitionMatrix,
    model_from_json,
    model_to_json,
    validate_model,
)
from .montecarlo import McSummary, mc_study, simulate
from .pipeline import PipelineConfig, ingest, run_pipeline

__version__ = "0.1.0"
