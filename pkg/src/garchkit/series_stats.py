"""Descriptive statistics, autocorrelation, and normality testing.

Operates on raw return series and on fitted conditional-volatility series
alike; every function is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DataError
from .ingest import ReturnSeries

__all__ = [
    "SummaryStats",
    "AcfProfile",
    "KsResult",
    "summarize",
    "ks_normality",
    "acf",
    "acf_values",
    "acf_band",
    "standardize",
]


def _values(series) -> np.ndarray:
    if isinstance(series, ReturnSeries):
        return series.values
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 1:
        raise DataError("expected a one-dimensional series")
    if not np.all(np.isfinite(arr)):
        raise DataError("series contains non-finite values")
    return arr


@dataclass(frozen=True)
class SummaryStats:
    """Five-number summary plus moments; skew/kurt are excess over the normal.

    skewness_excess / kurtosis_excess / ks_statistic are None (undefined)
    for a zero-variance series rather than NaN.
    """

    n: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float
    std_dev: float
    skewness_excess: float | None
    kurtosis_excess: float | None
    ks_statistic: float | None

    FIELDS = ("min", "q1", "median", "q3", "max", "mean", "std_dev",
              "skewness_excess", "kurtosis_excess", "ks_statistic")


@dataclass(frozen=True)
class AcfProfile:
    """Sample autocorrelations at lags 1..K with the 95% confidence band.

    The lag-0 correlation is definitionally 1 and not stored.
    """

    lags: np.ndarray
    correlations: np.ndarray
    band: float
    n: int


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float


def summarize(series) -> SummaryStats:
    """Summary statistics with quartiles by linear order-statistic interpolation.

    Central moments use the sample mean; kurtosis is the plain moment ratio
    m4/m2^2 - 3 (critical value 0 under normality).
    """
    x = _values(series)
    n = len(x)
    if n < 4:
        raise DataError(f"summarize needs at least 4 observations, got {n}")
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75])
    mean = float(np.mean(x))
    dev = x - mean
    scale = float(np.max(np.abs(dev)))
    if scale == 0.0:
        skew = kurt = ks = None
    else:
        # moment ratios on rescaled deviations: immune to under/overflow of dev**4
        u = dev / scale
        m2 = float(np.mean(u**2))
        skew = float(np.mean(u**3) / m2**1.5)
        kurt = float(np.mean(u**4) / m2**2 - 3.0)
        ks = _ks_statistic(u / np.std(u, ddof=1))
    return SummaryStats(
        n=n,
        min=float(np.min(x)),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        max=float(np.max(x)),
        mean=mean,
        std_dev=float(np.std(x, ddof=1)),
        skewness_excess=skew,
        kurtosis_excess=kurt,
        ks_statistic=ks,
    )


def _ks_statistic(z: np.ndarray) -> float:
    # sup distance between the empirical CDF and Phi, attained at sample points
    n = len(z)
    cdf = ndtr(np.sort(z))
    grid = np.arange(1, n + 1) / n
    d_plus = np.max(grid - cdf)
    d_minus = np.max(cdf - (grid - 1.0 / n))
    return float(max(d_plus, d_minus))


def _kolmogorov_sf(lam: float, terms: int = 200) -> float:
    # asymptotic survival function: 2 * sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lam^2)
    if lam <= 0.02:
        return 1.0
    k = np.arange(1, terms + 1)
    total = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * (k * lam) ** 2))
    return float(min(1.0, max(0.0, total)))


def ks_normality(series) -> KsResult:
    """One-sample Kolmogorov-Smirnov statistic of standardized values vs N(0,1).

    Values are standardized by the sample mean and standard deviation; the
    p-value is the one-sample asymptotic value from the Kolmogorov series
    (no correction for the estimated parameters).
    """
    x = _values(series)
    n = len(x)
    if n < 8:
        raise DataError(f"ks_normality needs at least 8 observations, got {n}")
    sd = np.std(x, ddof=1)
    if sd == 0.0:
        raise DataError("zero-variance series has no defined KS statistic")
    stat = _ks_statistic((x - np.mean(x)) / sd)
    return KsResult(statistic=stat, p_value=_kolmogorov_sf(math.sqrt(n) * stat))


def acf_values(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations for lags 0..max_lag (index 0 is exactly 1).

    Autocovariances use the full-sample mean and divisor T at every lag, so
    the values are bounded in [-1, 1].
    """
    x = _values(series)
    n = len(x)
    if max_lag < 0:
        raise DataError("max_lag must be nonnegative")
    if max_lag >= (n + 1) // 2:
        raise DataError(f"max_lag {max_lag} too large for series of length {n} (need < T/2)")
    dev = x - np.mean(x)
    c0 = float(np.dot(dev, dev))
    if c0 == 0.0:
        raise DataError("zero-variance series has no defined autocorrelation")
    rho = np.empty(max_lag + 1)
    rho[0] = 1.0
    for k in range(1, max_lag + 1):
        rho[k] = np.dot(dev[k:], dev[:-k]) / c0
    return rho


def acf(series, max_lag: int) -> AcfProfile:
    """Autocorrelation profile at lags 1..max_lag with the 1.96/sqrt(T) band."""
    x = _values(series)
    rho = acf_values(x, max_lag)
    return AcfProfile(
        lags=np.arange(1, max_lag + 1),
        correlations=rho[1:],
        band=acf_band(len(x)),
        n=len(x),
    )


def acf_band(n_obs: int) -> float:
    """Half-width of the 95% confidence band for sample autocorrelations."""
    if n_obs < 1:
        raise DataError("sample size must be >= 1")
    return 1.96 / math.sqrt(n_obs)


def standardize(returns, conditional_vol) -> np.ndarray:
    """Returns scaled by conditional volatility (elementwise ratio)."""
    r = _values(returns)
    v = _values(conditional_vol)
    if len(r) != len(v):
        raise DataError("returns and conditional volatility must have equal length")
    if np.any(v <= 0):
        raise DataError("conditional volatility must be strictly positive")
    return r / v
