"""Conditional-volatility modeling toolkit.

Estimates GARCH-family models (GARCH, GJR, log-variance EGARCH) with
exogenous regressors in the mean and variance equations by Gaussian
quasi-maximum likelihood, computes robust sandwich standard errors, runs a
misspecification-diagnostics battery, and ships a CSV-to-report pipeline
for daily return panels plus a simulator for fixture generation.
"""

from ._version import __version__
from .diagnostics import (
    DiagnosticsReport,
    EngleNgResult,
    StationarityReport,
    TestResult,
    engle_ng,
    ljung_box,
    lm_arch,
    run_battery,
    stationarity_report,
)
from .errors import ConfigError, DataError, EstimationError, GarchkitError, ModelError
from .estimation import (
    FitOptions,
    FitResult,
    bw_robust_covariance,
    finite_diff_gradient,
    finite_diff_hessian,
    fit,
    p_value,
)
from .ingest import (
    Panel,
    RawTable,
    ReturnMethod,
    ReturnSeries,
    align,
    build_dummies,
    load_csv,
    to_returns,
    write_csv,
)
from .model import (
    ModelSpec,
    ParamVector,
    Regressor,
    SimulationResult,
    VarianceFamily,
    VariancePath,
    log_likelihood,
    mean_residuals,
    per_observation_loglik,
    persistence,
    simulate,
    variance_recursion,
)
from .series_stats import (
    AcfProfile,
    KsResult,
    SummaryStats,
    acf,
    acf_band,
    acf_values,
    ks_normality,
    standardize,
    summarize,
)

__all__ = [
    "__version__",
    # errors
    "GarchkitError", "DataError", "ModelError", "EstimationError", "ConfigError",
    # ingest
    "ReturnMethod", "ReturnSeries", "RawTable", "Panel",
    "load_csv", "write_csv", "to_returns", "align", "build_dummies",
    # series statistics
    "SummaryStats", "AcfProfile", "KsResult",
    "summarize", "ks_normality", "acf", "acf_values", "acf_band", "standardize",
    # model core
    "VarianceFamily", "Regressor", "ModelSpec", "ParamVector", "VariancePath",
    "SimulationResult", "mean_residuals", "variance_recursion", "log_likelihood",
    "per_observation_loglik", "persistence", "simulate",
    # estimation
    "FitOptions", "FitResult", "fit", "bw_robust_covariance",
    "finite_diff_gradient", "finite_diff_hessian", "p_value",
    # diagnostics
    "TestResult", "EngleNgResult", "StationarityReport", "DiagnosticsReport",
    "ljung_box", "lm_arch", "engle_ng", "stationarity_report", "run_battery",
]
