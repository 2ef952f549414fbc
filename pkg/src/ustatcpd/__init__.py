"""Online detection of mean changes in high-dimensional streams with windowed
two-sample U-statistics (max-type and sum-type stopping rules)."""

__version__ = "0.1.0"

from .detector import DetectionReport, Detector, DetectorConfig, offline_statistics
from .errors import (
    CalibrationError,
    ConfigError,
    DataError,
    InconclusiveError,
    InsufficientTrainingError,
    NotReadyError,
    NumericError,
)
from .simulation import (
    Covariance,
    ExperimentResult,
    SimulationConfig,
    change_vector,
    estimate_overshoots,
    run_arl_experiment,
    run_edd_experiment,
    sample_stream,
)
from .theory import (
    arl_max,
    arl_sum,
    edd_max_bounds,
    edd_sum_formula,
    nu_closed,
    nu_series,
    rho_field,
    s_derivatives,
    solve_threshold,
    solve_threshold_max,
    solve_threshold_sum,
)
from .variance import (
    TrainingSummary,
    build_training_summary,
    estimate_tr_sigma2,
    sigma_s_squared,
    split_covariance,
)
from .window import SlidingWindow, compute_all_splits
