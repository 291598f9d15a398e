"""Misspecification battery for fitted standardized residuals.

Ljung-Box portmanteau on the residuals and their squares, the T*R^2
Lagrange-multiplier test for remaining ARCH, and the sign / negative-size /
positive-size / joint asymmetry regressions.  All statistics are functions
of correlations and regression R^2 / t quantities, so they are invariant to
rescaling the input series.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc

from .errors import DataError, ModelError
from .estimation import p_value
from .model import ModelSpec, ParamVector, VarianceFamily, persistence
from .series_stats import acf_values

__all__ = [
    "TestResult",
    "EngleNgResult",
    "StationarityReport",
    "DiagnosticsReport",
    "ljung_box",
    "lm_arch",
    "engle_ng",
    "stationarity_report",
    "run_battery",
    "chi2_sf",
]

DEFAULT_LAGS = 24


def chi2_sf(x: float, df: int) -> float:
    """Right-tail chi-square probability via the regularized incomplete gamma."""
    if x < 0:
        return 1.0
    return float(gammaincc(df / 2.0, x / 2.0))


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    degenerate: bool = False


@dataclass(frozen=True)
class EngleNgResult:
    """Signed t-statistics for the three single-regressor asymmetry tests and
    the joint n*R^2 statistic against chi-square(3)."""

    sign: TestResult
    negative_size: TestResult
    positive_size: TestResult
    joint: TestResult


@dataclass(frozen=True)
class StationarityReport:
    persistence: float
    stationary: bool


@dataclass(frozen=True)
class DiagnosticsReport:
    """One diagnostics row for a fitted model."""

    q_stat: float
    q_p: float
    q2_stat: float
    q2_p: float
    arch_stat: float
    arch_p: float
    sign_t: float
    sign_p: float
    nsize_t: float
    nsize_p: float
    psize_t: float
    psize_p: float
    joint_stat: float
    joint_p: float
    lags_used: int


def _vector(series) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise DataError("expected a one-dimensional series")
    if not np.all(np.isfinite(x)):
        raise DataError("series contains non-finite values")
    return x


def ljung_box(series, m: int = DEFAULT_LAGS) -> TestResult:
    """Q = T(T+2) * sum_{k<=m} rho_k^2/(T-k), referred to chi-square(m)."""
    x = _vector(series)
    n = len(x)
    if m < 1:
        raise DataError("need at least one lag")
    if m >= n / 4:
        raise DataError(f"lag depth {m} too large for {n} observations (need m < T/4)")
    rho = acf_values(x, m)[1:]
    q = n * (n + 2.0) * float(np.sum(rho**2 / (n - np.arange(1, m + 1))))
    return TestResult(statistic=q, p_value=chi2_sf(q, m))


def _ols(y: np.ndarray, x_mat: np.ndarray):
    """OLS fit returning (coefficients, R^2, classic t-statistics)."""
    n, k = x_mat.shape
    beta, _, rank, _ = np.linalg.lstsq(x_mat, y, rcond=None)
    resid = y - x_mat @ beta
    ssr = float(resid @ resid)
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0 or rank < k:
        return beta, None, None
    r2 = 1.0 - ssr / sst
    sigma2 = ssr / (n - k)
    xtx_inv = np.linalg.pinv(x_mat.T @ x_mat)
    se = np.sqrt(np.maximum(sigma2 * np.diag(xtx_inv), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        tstats = np.where(se > 0, beta / se, np.nan)
    return beta, r2, tstats


def lm_arch(series, p_lags: int = DEFAULT_LAGS) -> TestResult:
    """n*R^2 from regressing squared values on a constant and their own lags.

    A collinear lag matrix (e.g. constant squares) yields statistic 0 with
    the degenerate flag set.
    """
    x = _vector(series)
    n = len(x)
    if p_lags < 1:
        raise DataError("need at least one lag")
    if p_lags >= n / 4:
        raise DataError(f"lag depth {p_lags} too large for {n} observations (need p < T/4)")
    y2 = x * x
    rows = n - p_lags
    lags = np.column_stack([y2[p_lags - j: n - j] for j in range(1, p_lags + 1)])
    design = np.column_stack([np.ones(rows), lags])
    _, r2, _ = _ols(y2[p_lags:], design)
    if r2 is None:
        return TestResult(statistic=0.0, p_value=1.0, degenerate=True)
    stat = rows * r2
    return TestResult(statistic=stat, p_value=chi2_sf(stat, p_lags))


def engle_ng(residuals) -> EngleNgResult:
    """Sign and size asymmetry tests on a residual series.

    Regressand y_t^2; regressors dated t-1: the negative-sign indicator
    N_{t-1}, the signed sizes N_{t-1}*y_{t-1} and P_{t-1}*y_{t-1}.  The
    single-regressor tests report OLS t-statistics with two-sided normal
    p-values; the joint test is n*R^2 against chi-square(3).
    """
    y = _vector(residuals)
    n = len(y)
    if n < 30:
        raise DataError(f"engle_ng needs at least 30 observations, got {n}")
    neg = (y < 0).astype(float)
    if neg.all() or not neg.any():
        raise DataError("residual series has no sign variation")

    y2 = (y * y)[1:]
    n_prev = neg[:-1]
    ny_prev = n_prev * y[:-1]
    py_prev = (1.0 - n_prev) * y[:-1]
    rows = n - 1
    ones = np.ones(rows)

    def t_test(regressor: np.ndarray) -> TestResult:
        _, r2, tstats = _ols(y2, np.column_stack([ones, regressor]))
        if tstats is None or not np.isfinite(tstats[1]):
            return TestResult(statistic=0.0, p_value=1.0, degenerate=True)
        t = float(tstats[1])
        return TestResult(statistic=t, p_value=p_value(t))

    _, r2, _ = _ols(y2, np.column_stack([ones, n_prev, ny_prev, py_prev]))
    if r2 is None:
        joint = TestResult(statistic=0.0, p_value=1.0, degenerate=True)
    else:
        stat = rows * r2
        joint = TestResult(statistic=stat, p_value=chi2_sf(stat, 3))

    return EngleNgResult(
        sign=t_test(n_prev),
        negative_size=t_test(ny_prev),
        positive_size=t_test(py_prev),
        joint=joint,
    )


def stationarity_report(spec: ModelSpec, params: ParamVector) -> StationarityReport:
    """Persistence of the level families and whether it is below unity.

    Reported, never enforced: fits may legitimately exceed one.
    """
    if spec.family is VarianceFamily.LOG_EGARCH:
        raise ModelError("stationarity_report applies to the level families (GARCH/GJR)")
    total = persistence(spec, params)
    return StationarityReport(persistence=total, stationary=total < 1.0)


def run_battery(residuals, lags: int = DEFAULT_LAGS) -> DiagnosticsReport:
    """Full diagnostics row: Q, Q-squared, ARCH LM, and the asymmetry tests."""
    x = _vector(residuals)
    q = ljung_box(x, lags)
    q2 = ljung_box(x * x, lags)
    arch = lm_arch(x, lags)
    en = engle_ng(x)
    return DiagnosticsReport(
        q_stat=q.statistic, q_p=q.p_value,
        q2_stat=q2.statistic, q2_p=q2.p_value,
        arch_stat=arch.statistic, arch_p=arch.p_value,
        sign_t=en.sign.statistic, sign_p=en.sign.p_value,
        nsize_t=en.negative_size.statistic, nsize_p=en.negative_size.p_value,
        psize_t=en.positive_size.statistic, psize_p=en.positive_size.p_value,
        joint_stat=en.joint.statistic, joint_p=en.joint.p_value,
        lags_used=lags,
    )
