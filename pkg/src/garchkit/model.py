"""Model specification, conditional-variance recursions, Gaussian likelihood,
and process simulation.

Mean equation: R_t = b'Z_t + eps_t with eps_t | I_{t-1} ~ N(0, H_t).

Variance families (all support exogenous terms delta'X_t):

  GARCH       H_t = omega + sum_i alpha_i*eps^2_{t-i} + sum_j beta_j*H_{t-j} + delta'X_t
  GJR         adds sum_i gamma_i*S_{t-i}*eps^2_{t-i}, S = 1 when eps < 0
  LOG_EGARCH  ln H_t = omega + sum_j beta_j*ln H_{t-j}
                     + sum_i [alpha_i*(|z_{t-i}| - sqrt(2/pi)) + gamma_i*z_{t-i}]
                     + delta'X_t,   z = eps/sqrt(H)

Initialization convention (shared by filter and simulator so round-trips are
exact): H_1 = sample variance of the residuals, pre-sample eps = 0 and
pre-sample H = H_1.  When p = q = 0 there is no recursion and the formula
applies from the first observation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DataError, ModelError
from .ingest import Panel, ReturnSeries

__all__ = [
    "VarianceFamily",
    "Regressor",
    "ModelSpec",
    "ParamVector",
    "VariancePath",
    "SimulationResult",
    "VARIANCE_FLOOR",
    "mean_residuals",
    "variance_recursion",
    "log_likelihood",
    "per_observation_loglik",
    "persistence",
    "simulate",
    "build_design",
]

LOG_2PI = math.log(2.0 * math.pi)
VARIANCE_FLOOR = 1e-12  # %^2 per day; recursion output is clamped here
CLAMP_PENALTY_WEIGHT = 1e4
ABS_Z_MEAN = math.sqrt(2.0 / math.pi)  # E|z| for standard normal z
_LN_OVERFLOW = 700.0


class VarianceFamily(Enum):
    GARCH = "garch"
    GJR = "gjr"
    LOG_EGARCH = "egarch"

    @property
    def has_asymmetry(self) -> bool:
        return self is not VarianceFamily.GARCH


@dataclass(frozen=True)
class Regressor:
    """Panel column entering an equation at the given lag (0 = contemporaneous)."""

    name: str
    lag: int = 0

    def __post_init__(self):
        if self.lag < 0:
            raise ModelError(f"regressor lag must be >= 0, got {self.lag}")

    @property
    def label(self) -> str:
        return self.name if self.lag == 0 else f"{self.name}(t-{self.lag})"


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of one estimation problem."""

    dependent: str
    family: VarianceFamily = VarianceFamily.GARCH
    p: int = 1  # ARCH lags
    q: int = 1  # GARCH lags
    mean_regressors: tuple[Regressor, ...] = ()
    variance_regressors: tuple[Regressor, ...] = ()
    include_constant_mean: bool = True
    distribution: str = "normal"

    def __post_init__(self):
        object.__setattr__(self, "mean_regressors", tuple(self.mean_regressors))
        object.__setattr__(self, "variance_regressors", tuple(self.variance_regressors))
        if self.p < 0 or self.q < 0:
            raise ModelError(f"orders must be nonnegative, got p={self.p}, q={self.q}")
        if self.distribution != "normal":
            raise ModelError(f"only the normal innovation density is supported, got {self.distribution!r}")
        for group in (self.mean_regressors, self.variance_regressors):
            seen = set()
            for reg in group:
                key = (reg.name, reg.lag)
                if key in seen:
                    raise ModelError(f"duplicate regressor {reg.label}")
                seen.add(key)

    @property
    def n_mean(self) -> int:
        return int(self.include_constant_mean) + len(self.mean_regressors)

    @property
    def n_gamma(self) -> int:
        return self.p if self.family.has_asymmetry else 0

    @property
    def max_lag(self) -> int:
        lags = [r.lag for r in self.mean_regressors + self.variance_regressors]
        return max(lags, default=0)


def _float_array(x, n: int, what: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (n,):
        raise ModelError(f"{what} must have length {n}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ParamVector:
    """Coefficients of one model: mean loadings b, variance intercept omega,
    ARCH loadings alpha, GARCH loadings beta, asymmetry loadings gamma,
    and variance-regressor loadings delta."""

    b: np.ndarray
    omega: float
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray | None = None
    delta: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        object.__setattr__(self, "b", np.atleast_1d(np.asarray(self.b, dtype=float)))
        object.__setattr__(self, "alpha", np.atleast_1d(np.asarray(self.alpha, dtype=float)) if np.size(self.alpha) else np.empty(0))
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)) if np.size(self.beta) else np.empty(0))
        if self.gamma is not None:
            object.__setattr__(self, "gamma", np.atleast_1d(np.asarray(self.gamma, dtype=float)) if np.size(self.gamma) else np.empty(0))
        object.__setattr__(self, "delta", np.atleast_1d(np.asarray(self.delta, dtype=float)) if np.size(self.delta) else np.empty(0))

    def validate(self, spec: ModelSpec) -> None:
        if len(self.b) != spec.n_mean:
            raise ModelError(f"b must have length {spec.n_mean}, got {len(self.b)}")
        if len(self.alpha) != spec.p or len(self.beta) != spec.q:
            raise ModelError(
                f"expected {spec.p} alpha and {spec.q} beta loadings, "
                f"got {len(self.alpha)} and {len(self.beta)}"
            )
        if spec.family.has_asymmetry and spec.p > 0:
            if self.gamma is None or len(self.gamma) != spec.p:
                raise ModelError(f"{spec.family.value} needs {spec.p} gamma loadings")
        elif self.gamma is not None and len(self.gamma) and np.any(self.gamma != 0.0):
            raise ModelError("gamma loadings are only valid for GJR/LOG_EGARCH")
        if len(self.delta) != len(spec.variance_regressors):
            raise ModelError(
                f"expected {len(spec.variance_regressors)} delta loadings, got {len(self.delta)}"
            )
        if spec.family is not VarianceFamily.LOG_EGARCH:
            # positivity domain for the level recursions
            if not self.omega > 0:
                raise ModelError(f"omega must be > 0, got {self.omega}")
            if np.any(self.alpha < 0) or np.any(self.beta < 0):
                raise ModelError("alpha and beta must be nonnegative")
            if spec.family is VarianceFamily.GJR and np.any(self.alpha + self.gamma < 0):
                raise ModelError("alpha + gamma must be nonnegative for GJR")


@dataclass(frozen=True)
class VariancePath:
    """Residuals and conditional variances over the usable sample."""

    residuals: np.ndarray
    variance: np.ndarray
    clamped: int = 0
    clamp_penalty: float = 0.0
    diverged: bool = False

    @property
    def conditional_std(self) -> np.ndarray:
        return np.sqrt(self.variance)

    def __len__(self) -> int:
        return len(self.variance)


def build_design(spec: ModelSpec, panel: Panel):
    """Assemble (y, Z, X, mean_names, var_names) over the usable sample.

    The usable sample starts after the maximum regressor lag; lagged columns
    are shifted so row t of every matrix refers to the same calendar date.
    """
    for reg in spec.mean_regressors + spec.variance_regressors:
        if reg.name not in panel.columns:
            raise ModelError(f"unresolved column name {reg.name!r}")
    if spec.dependent not in panel.columns:
        raise ModelError(f"unresolved dependent column {spec.dependent!r}")

    L = spec.max_lag
    T = len(panel)
    if T - L < 2:
        raise DataError(f"panel too short: {T} rows with max lag {L}")
    y = panel.column(spec.dependent)[L:]

    def lagged(reg: Regressor) -> np.ndarray:
        col = panel.column(reg.name)
        return col[L - reg.lag: T - reg.lag]

    mean_cols, mean_names = [], []
    if spec.include_constant_mean:
        mean_cols.append(np.ones(T - L))
        mean_names.append("const")
    for reg in spec.mean_regressors:
        col = lagged(reg)
        if np.ptp(col) == 0.0:
            warnings.warn(f"degenerate (constant) mean regressor {reg.label}", stacklevel=2)
        mean_cols.append(col)
        mean_names.append(reg.label)
    Z = np.column_stack(mean_cols) if mean_cols else np.empty((T - L, 0))

    var_cols, var_names = [], []
    for reg in spec.variance_regressors:
        col = lagged(reg)
        if np.ptp(col) == 0.0:
            warnings.warn(f"degenerate (constant) variance regressor {reg.label}", stacklevel=2)
        var_cols.append(col)
        var_names.append(reg.label)
    X = np.column_stack(var_cols) if var_cols else np.empty((T - L, 0))
    return y, Z, X, mean_names, var_names


def mean_residuals(spec: ModelSpec, b, panel: Panel) -> np.ndarray:
    """eps_t = R_t - b'Z_t over the usable sample."""
    y, Z, _, names, _ = build_design(spec, panel)
    b = _float_array(b, len(names), "b")
    return y - Z @ b


def _garch_path(omega, alpha, gamma, beta, e2, neg, xdot, h_init, floor):
    """Level recursion shared by GARCH and GJR (gamma = zeros for GARCH)."""
    T = len(e2)
    p, q = len(alpha), len(beta)
    h = [0.0] * T
    clamp_penalty = 0.0
    clamped = 0
    start = 1 if (p or q) else 0
    if start:
        h[0] = h_init
    if p == 1 and q == 1:
        a0, g0, b0 = alpha[0], gamma[0], beta[0]
        hp = h_init
        for t in range(1, T):
            a = a0 + g0 if neg[t - 1] else a0
            v = omega + xdot[t] + a * e2[t - 1] + b0 * hp
            if v < floor:
                clamp_penalty += (floor - v) * (floor - v)
                clamped += 1
                v = floor
            h[t] = hp = v
    else:
        for t in range(start, T):
            v = omega + xdot[t]
            for i in range(1, p + 1):
                if t - i < 0:
                    continue  # pre-sample eps = 0
                a = alpha[i - 1] + gamma[i - 1] if neg[t - i] else alpha[i - 1]
                v += a * e2[t - i]
            for j in range(1, q + 1):
                v += beta[j - 1] * (h[t - j] if t - j >= 0 else h_init)
            if v < floor:
                clamp_penalty += (floor - v) * (floor - v)
                clamped += 1
                v = floor
            h[t] = v
    arr = np.asarray(h)
    diverged = not np.all(np.isfinite(arr))
    return arr, clamped, clamp_penalty, diverged


def _egarch_path(omega, alpha, gamma, beta, eps, xdot, h_init):
    """Log-variance recursion; positivity holds by construction, no clamping."""
    T = len(eps)
    p, q = len(alpha), len(beta)
    lnh = [0.0] * T
    z = [0.0] * T
    ln_init = math.log(h_init)
    c = ABS_Z_MEAN
    start = 1 if (p or q) else 0
    if start:
        lnh[0] = ln_init
        z[0] = eps[0] / math.sqrt(h_init)
    for t in range(start, T):
        v = omega + xdot[t]
        for i in range(1, p + 1):
            zi = z[t - i] if t - i >= 0 else 0.0  # pre-sample eps = 0
            v += alpha[i - 1] * (abs(zi) - c) + gamma[i - 1] * zi
        for j in range(1, q + 1):
            v += beta[j - 1] * (lnh[t - j] if t - j >= 0 else ln_init)
        if not (-_LN_OVERFLOW < v < _LN_OVERFLOW):
            return np.full(T, np.nan), True
        lnh[t] = v
        z[t] = eps[t] / math.sqrt(math.exp(v))
    return np.exp(lnh), False


def variance_recursion(spec: ModelSpec, params: ParamVector, residuals,
                       panel: Panel | None = None, h1: float | None = None) -> VariancePath:
    """Run the family's conditional-variance recursion over a residual series.

    ``h1`` overrides the default initialization (sample variance of the
    residuals).  ``panel`` is required when the spec has variance regressors;
    its usable-sample rows must line up with ``residuals``.
    """
    params.validate(spec)
    eps = np.asarray(residuals, dtype=float)
    if eps.ndim != 1 or len(eps) == 0:
        raise ModelError("residuals must be a nonempty vector")

    if spec.variance_regressors:
        if panel is None:
            raise ModelError("panel required: spec has variance regressors")
        _, _, X, _, _ = build_design(spec, panel)
        if len(X) != len(eps):
            raise ModelError(f"residual length {len(eps)} != usable sample {len(X)}")
        xdot = (X @ params.delta).tolist()
    else:
        xdot = [0.0] * len(eps)

    if h1 is None:
        h_init = float(np.var(eps))
        if h_init <= 0.0:
            h_init = VARIANCE_FLOOR
    else:
        if h1 <= 0.0:
            raise ModelError(f"h1 must be positive, got {h1}")
        h_init = float(h1)

    gamma = params.gamma if params.gamma is not None else np.zeros(spec.p)
    if spec.family is VarianceFamily.LOG_EGARCH:
        h, diverged = _egarch_path(
            params.omega, params.alpha.tolist(), gamma.tolist(),
            params.beta.tolist(), eps.tolist(), xdot, h_init,
        )
        clamped, penalty = 0, 0.0
    else:
        e2 = (eps * eps).tolist()
        neg = (eps < 0.0).tolist()
        h, clamped, penalty, diverged = _garch_path(
            params.omega, params.alpha.tolist(), gamma.tolist(),
            params.beta.tolist(), e2, neg, xdot, h_init, VARIANCE_FLOOR,
        )
    return VariancePath(
        residuals=eps, variance=h, clamped=clamped,
        clamp_penalty=penalty, diverged=diverged,
    )


def per_observation_loglik(spec: ModelSpec, params: ParamVector, panel: Panel,
                           h1: float | None = None) -> np.ndarray:
    """Vector of Gaussian conditional log-densities, one per usable observation.

    No clamping penalty is included; non-finite entries signal divergence.
    """
    eps = mean_residuals(spec, params.b, panel)
    path = variance_recursion(spec, params, eps, panel, h1=h1)
    if path.diverged:
        return np.full(len(eps), -np.inf)
    h = path.variance
    return -0.5 * (LOG_2PI + np.log(h) + path.residuals**2 / h)


def log_likelihood(spec: ModelSpec, params: ParamVector, panel: Panel,
                   h1: float | None = None) -> float:
    """Gaussian log-likelihood minus a smooth penalty for floor clamping.

    Returns -inf when the recursion diverges.
    """
    eps = mean_residuals(spec, params.b, panel)
    path = variance_recursion(spec, params, eps, panel, h1=h1)
    return loglik_from_path(path)


def loglik_from_path(path: VariancePath) -> float:
    if path.diverged:
        return -np.inf
    h = path.variance
    core = -0.5 * float(np.sum(LOG_2PI + np.log(h) + path.residuals**2 / h))
    if not math.isfinite(core):
        return -np.inf
    return core - CLAMP_PENALTY_WEIGHT * path.clamp_penalty


def persistence(spec: ModelSpec, params: ParamVector) -> float:
    """Sum of variance loadings: alpha + beta (+ gamma/2 for GJR); beta for
    the log family, where the loadings act on ln H."""
    if spec.family is VarianceFamily.LOG_EGARCH:
        return float(np.sum(params.beta))
    total = float(np.sum(params.alpha) + np.sum(params.beta))
    if spec.family is VarianceFamily.GJR and params.gamma is not None:
        total += 0.5 * float(np.sum(params.gamma))
    return total


@dataclass(frozen=True)
class SimulationResult:
    """Simulated returns plus the true conditional-variance path."""

    series: ReturnSeries
    variance: np.ndarray
    residuals: np.ndarray
    spec: ModelSpec
    params: ParamVector
    seed: int


def _sim_mean_lags(spec: ModelSpec) -> list[tuple[int, int]]:
    """(coefficient index in b, lag) for own-lag autoregressive terms."""
    out = []
    offset = int(spec.include_constant_mean)
    for k, reg in enumerate(spec.mean_regressors):
        if reg.name != spec.dependent or reg.lag == 0:
            raise ModelError(
                "simulate supports constant and own-lag mean regressors only; "
                f"got {reg.label}"
            )
        out.append((offset + k, reg.lag))
    return out


def simulate(spec: ModelSpec, params: ParamVector, n_obs: int, seed: int,
             burn_in: int = 500, start_date="1999-01-04",
             allow_explosive: bool = False) -> SimulationResult:
    """Draw a return path from the model; deterministic given the seed.

    z_t are standard normal, eps_t = z_t*sqrt(H_t), and R_t follows the mean
    equation.  The first ``burn_in`` observations are discarded.
    """
    params.validate(spec)
    if spec.variance_regressors:
        raise ModelError("simulate does not support variance regressors")
    ar_terms = _sim_mean_lags(spec)
    if n_obs < 2:
        raise ModelError("n_obs must be >= 2")

    pers = persistence(spec, params)
    explosive = pers >= 1.0
    if explosive and not allow_explosive:
        raise ModelError(
            f"persistence {pers:.3f} >= 1 is explosive; pass allow_explosive=True to force"
        )
    if spec.family is VarianceFamily.LOG_EGARCH:
        ln_uncond = params.omega if explosive else params.omega / (1.0 - pers)
        h_start = math.exp(min(max(ln_uncond, -_LN_OVERFLOW), _LN_OVERFLOW))
    else:
        h_start = params.omega if explosive else params.omega / (1.0 - pers)

    rng = np.random.default_rng(seed)
    total = burn_in + n_obs
    z = rng.standard_normal(total)

    gamma = (params.gamma if params.gamma is not None else np.zeros(spec.p)).tolist()
    alpha, beta = params.alpha.tolist(), params.beta.tolist()
    omega = params.omega
    p, q = spec.p, spec.q

    h = [0.0] * total
    eps = [0.0] * total
    if spec.family is VarianceFamily.LOG_EGARCH:
        lnh = [0.0] * total
        zs = [0.0] * total
        ln_init = math.log(h_start)
        c = ABS_Z_MEAN
        for t in range(total):
            if t == 0 and (p or q):
                v = ln_init
            else:
                v = omega
                for i in range(1, p + 1):
                    zi = zs[t - i] if t - i >= 0 else 0.0
                    v += alpha[i - 1] * (abs(zi) - c) + gamma[i - 1] * zi
                for j in range(1, q + 1):
                    v += beta[j - 1] * (lnh[t - j] if t - j >= 0 else ln_init)
                if not (-_LN_OVERFLOW < v < _LN_OVERFLOW):
                    raise ModelError("simulated log-variance overflowed; parameterization explosive")
            lnh[t] = v
            ht = math.exp(v)
            h[t] = ht
            eps[t] = z[t] * math.sqrt(ht)
            zs[t] = z[t]
    else:
        for t in range(total):
            if t == 0 and (p or q):
                v = h_start
            else:
                v = omega
                for i in range(1, p + 1):
                    if t - i >= 0:
                        a = alpha[i - 1] + gamma[i - 1] if eps[t - i] < 0.0 else alpha[i - 1]
                        v += a * eps[t - i] * eps[t - i]
                for j in range(1, q + 1):
                    v += beta[j - 1] * (h[t - j] if t - j >= 0 else h_start)
            if not (0.0 <= v < 1e300):
                raise ModelError("simulated variance overflowed; parameterization explosive")
            v = max(v, VARIANCE_FLOOR)
            h[t] = v
            eps[t] = z[t] * math.sqrt(v)

    # mean equation over the full path, then discard burn-in
    r = [0.0] * total
    b = params.b.tolist()
    const = b[0] if spec.include_constant_mean else 0.0
    for t in range(total):
        v = const + eps[t]
        for bi, lag in ar_terms:
            if t - lag >= 0:
                v += b[bi] * r[t - lag]
        r[t] = v

    dates = np.busday_offset(np.datetime64(start_date), np.arange(n_obs))
    return SimulationResult(
        series=ReturnSeries(dates, np.asarray(r[burn_in:]), name=spec.dependent),
        variance=np.asarray(h[burn_in:]),
        residuals=np.asarray(eps[burn_in:]),
        spec=spec,
        params=params,
        seed=seed,
    )
