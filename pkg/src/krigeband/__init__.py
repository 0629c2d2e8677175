"""Functional kriging with conformal prediction bands.

Predict a curve at an unobserved spatial location by ordinary kriging on a
trace-variogram, then surround it with a distribution-free band calibrated
on surrogate predictions at held-out sites. Includes a scenario generator,
evaluation metrics, and a pointwise bootstrap comparator.
"""

from .bootstrap import BootstrapBand, BootstrapConfig, bootstrap_band
from .conformal import (
    CaseConfig,
    ConformalResult,
    PredictionBand,
    ProximitySplit,
    SurrogateSet,
    case_configs,
    conformal_predict,
    conformal_predict_detailed,
    conformal_radius,
    default_model_fitter,
    modulation_sqrt,
    modulation_sup,
    proximity_split,
    score_sqrt,
    score_sup,
    surrogate_predictions,
    write_band_csv,
)
from .errors import (
    BaselineFailureError,
    ConformalStageError,
    DegenerateFitError,
    EmptyVariogramError,
    GenerationError,
    GridMismatchError,
    IngestError,
    KrigebandError,
    SingularSystemError,
    SolverFailureError,
    SplitDegenerateError,
    SurrogateFailureError,
    UnderdeterminedFitError,
)
from .fdata import (
    BasisSystem,
    Curve,
    Site,
    SpatialFunctionalDataset,
    TimeGrid,
    read_long_csv,
    smooth_dataset,
    smooth_to_basis,
    write_long_csv,
)
from .kriging import (
    KrigingSolution,
    KrigingSystem,
    SolverSettings,
    assemble_system,
    krige,
    predict_curve,
    solve_weights,
    solve_weights_direct,
)
from .metrics import (
    CaseMetrics,
    TimingAccumulator,
    band_score,
    band_width,
    global_coverage,
    local_coverage,
    write_metrics_csv,
)
from .runner import (
    CaseEvaluation,
    TargetOutcome,
    run_bootstrap_loocv,
    run_case_loocv,
    run_sweep,
)
from .simulate import (
    ScenarioConfig,
    gp_covariance,
    grid_sites,
    mean_function,
    sample_dataset,
    sample_noise,
    scenario_mean,
)
from .variogram import (
    EmpiricalVariogram,
    VariogramModel,
    empirical_trace_variogram,
    eval_model,
    fit_model,
    model_from_json,
    model_to_json,
)

__version__ = "0.1.0"
