"""State-of-health estimation from relaxing-voltage fingerprints."""

__version__ = "0.1.0"

from .errors import (CoverageError, FitError, NoEstimateError, NotFullyChargedError, SchemaError, SohError,
                     TooShortError, TraceParseError, TraceValidationError, VoltageRangeError)
from .trace import (BatterySpec, ChargeProfile, CycleRecord, VoltageSample, VoltageTrace, dropped_voltage,
                    format_trace, parse_trace, resample_to_grid)
from .fitting import (ExpFit, LinearFit, PowerFit, eval_power, fit_exponential, fit_linear, fit_power,
                      goodness)
from .preprocessing import (CycleDataset, FilterReport, apply_filters, filter_soh_outliers,
                            filter_trace_outliers, moving_average, preprocess)
from .pca import PcaModel, pca_fit, pca_project
from .tree import RegressionTree, tree_predict, tree_train
from .fingerprint import (FingerprintModel, TrainConfig, evaluate_confusion, extend_dataset, train_map)
from .generality import dimension_correlation, dtw_distance
from .session import (ChargeSessionLog, RelaxSubTrace, delta_signal, detect_full_charge, low_pass,
                      recover_trace, segment_subtraces)
from .estimator import EstimateHistory, SohEstimate, coulomb_count, estimate_session, smooth_history
from .baselines import BaselineModel, baseline_fit, baseline_predict
from .usecases import (compensated_soc, detect_abnormal_drop, estimate_resistance, percentile_rank,
                       remaining_time)
from .simulator import (SimBatteryConfig, preset, simulate_campaign, simulate_cycle,
                        simulate_overnight_session)

__all__ = [
    "apply_filters", "baseline_fit", "baseline_predict", "BaselineModel", "BatterySpec", "ChargeProfile",
    "ChargeSessionLog", "compensated_soc", "coulomb_count", "CoverageError", "CycleDataset", "CycleRecord",
    "delta_signal", "detect_abnormal_drop", "detect_full_charge", "dimension_correlation", "dropped_voltage",
    "dtw_distance", "estimate_resistance", "estimate_session", "EstimateHistory", "eval_power",
    "evaluate_confusion", "ExpFit", "extend_dataset", "filter_soh_outliers", "filter_trace_outliers",
    "FilterReport", "FingerprintModel", "fit_exponential", "fit_linear", "fit_power", "FitError",
    "format_trace", "goodness", "LinearFit", "low_pass", "moving_average", "NoEstimateError",
    "NotFullyChargedError", "parse_trace", "pca_fit", "pca_project", "PcaModel", "percentile_rank",
    "PowerFit", "preprocess", "preset", "recover_trace", "RegressionTree", "RelaxSubTrace", "remaining_time",
    "resample_to_grid", "SchemaError", "segment_subtraces", "SimBatteryConfig", "simulate_campaign",
    "simulate_cycle", "simulate_overnight_session", "smooth_history", "SohError", "SohEstimate",
    "TooShortError", "TraceParseError", "TraceValidationError", "train_map", "TrainConfig", "tree_predict",
    "tree_train", "VoltageRangeError", "VoltageSample", "VoltageTrace",
]
