"""Quasi-maximum-likelihood fitting of a ModelSpec to a Panel.

The optimizer works on a transformed parameter vector: for the level
families (GARCH/GJR) the variance loadings omega, alpha, gamma, beta are
exp-transformed so they are positive by construction, with no stationarity
constraint imposed (fits may exceed unit persistence); mean and
variance-regressor coefficients are unconstrained.  The log-variance family
needs no transform at all.

Inference uses the sandwich covariance A^-1 B A^-1 / T, where A is the
average negative Hessian of the per-observation log-density and B the
average outer product of per-observation scores, both by central finite
differences in the transformed space and mapped to the reported
parameterization by the delta method.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import EstimationError
from .ingest import Panel
from .model import (
    CLAMP_PENALTY_WEIGHT,
    LOG_2PI,
    VARIANCE_FLOOR,
    ModelSpec,
    ParamVector,
    VarianceFamily,
    VariancePath,
    _egarch_path,
    _garch_path,
    build_design,
    persistence,
)

__all__ = [
    "FitOptions",
    "FitResult",
    "fit",
    "bw_robust_covariance",
    "finite_diff_gradient",
    "finite_diff_hessian",
    "p_value",
]

_THETA_CAP = 600.0  # exp argument cap; keeps transformed values finite


def p_value(z: float) -> float:
    """Two-sided p-value of a z-statistic against the standard normal."""
    if not math.isfinite(z):
        raise EstimationError(f"z-statistic must be finite, got {z}")
    return math.erfc(abs(z) / math.sqrt(2.0))


def finite_diff_gradient(f, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient with step h_i = max(h*|x_i|, h)."""
    x = np.asarray(x, dtype=float)
    grad = np.empty(len(x))
    for i in range(len(x)):
        hi = max(h * abs(x[i]), h)
        xp, xm = x.copy(), x.copy()
        xp[i] += hi
        xm[i] -= hi
        fp, fm = f(xp), f(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise EstimationError(f"non-finite evaluation inside the gradient stencil at i={i}")
        grad[i] = (fp - fm) / (2.0 * hi)
    return grad


def finite_diff_hessian(f, x, h: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian, symmetrized as (H + H')/2."""
    x = np.asarray(x, dtype=float)
    k = len(x)
    steps = np.maximum(h * np.abs(x), h)
    f0 = f(x)
    if not np.isfinite(f0):
        raise EstimationError("non-finite evaluation at the Hessian center")
    hess = np.empty((k, k))
    for i in range(k):
        xp, xm = x.copy(), x.copy()
        xp[i] += steps[i]
        xm[i] -= steps[i]
        fp, fm = f(xp), f(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise EstimationError(f"non-finite evaluation inside the Hessian stencil at i={i}")
        hess[i, i] = (fp - 2.0 * f0 + fm) / steps[i] ** 2
        for j in range(i + 1, k):
            xpp, xpm, xmp, xmm = x.copy(), x.copy(), x.copy(), x.copy()
            xpp[i] += steps[i]
            xpp[j] += steps[j]
            xpm[i] += steps[i]
            xpm[j] -= steps[j]
            xmp[i] -= steps[i]
            xmp[j] += steps[j]
            xmm[i] -= steps[i]
            xmm[j] -= steps[j]
            vals = [f(xpp), f(xpm), f(xmp), f(xmm)]
            if not all(np.isfinite(v) for v in vals):
                raise EstimationError(f"non-finite evaluation inside the Hessian stencil at ({i},{j})")
            hess[i, j] = hess[j, i] = (vals[0] - vals[1] - vals[2] + vals[3]) / (4.0 * steps[i] * steps[j])
    return 0.5 * (hess + hess.T)


@dataclass(frozen=True)
class FitOptions:
    """Optimization controls; the default schedule is 5 deterministic starts
    (moment-matched plus jittered copies), simplex descent per start, and a
    quasi-Newton polish of the best candidates."""

    n_starts: int = 5
    max_evals_per_start: int = 10_000
    loglik_tol: float = 1e-8
    param_tol: float = 1e-6
    polish_top: int = 2
    jitter_seed: int = 20230415
    initial_params: ParamVector | None = None


@dataclass(frozen=True)
class FitResult:
    """One fitted model: reported coefficients with robust inference plus the
    fitted variance path."""

    spec: ModelSpec
    param_names: list[str]
    estimates: np.ndarray
    params: ParamVector
    loglik: float
    robust_cov: np.ndarray
    std_errors: np.ndarray
    z_stats: np.ndarray
    p_values: np.ndarray
    variance_path: VariancePath
    standardized_residuals: np.ndarray
    persistence: float
    converged: bool
    iterations: int
    restarts: int
    n_obs: int
    n_mean: int  # leading entries of `estimates` that belong to the mean equation
    cov_warning: bool = False

    @property
    def mean_table(self):
        return list(zip(self.param_names[: self.n_mean], self.estimates[: self.n_mean],
                        self.std_errors[: self.n_mean], self.p_values[: self.n_mean]))

    @property
    def variance_table(self):
        return list(zip(self.param_names[self.n_mean:], self.estimates[self.n_mean:],
                        self.std_errors[self.n_mean:], self.p_values[self.n_mean:]))


class _Parameterization:
    """Packing/unpacking between theta (free vector) and reported coefficients.

    Layout: [b] [omega] [alpha] [gamma] [beta] [delta].
    """

    def __init__(self, spec: ModelSpec, mean_names, var_names):
        self.spec = spec
        self.n_mean = spec.n_mean
        self.n_gamma = spec.n_gamma
        self.n_var = len(var_names)
        self.names = list(mean_names) + ["omega"]
        self.names += [f"alpha[{i}]" for i in range(1, spec.p + 1)]
        self.names += [f"gamma[{i}]" for i in range(1, self.n_gamma + 1)]
        self.names += [f"beta[{j}]" for j in range(1, spec.q + 1)]
        self.names += list(var_names)
        self.n_free = len(self.names)
        exp_block = spec.family is not VarianceFamily.LOG_EGARCH
        mask = np.zeros(self.n_free, dtype=bool)
        n_core = 1 + spec.p + self.n_gamma + spec.q
        mask[self.n_mean: self.n_mean + n_core] = exp_block
        self.exp_mask = mask

    def reported(self, theta: np.ndarray) -> np.ndarray:
        out = np.array(theta, dtype=float)
        out[self.exp_mask] = np.exp(np.minimum(out[self.exp_mask], _THETA_CAP))
        return out

    def theta_from_reported(self, rep: np.ndarray) -> np.ndarray:
        rep = np.asarray(rep, dtype=float)
        if np.any(rep[self.exp_mask] <= 0.0):
            raise EstimationError("exp-transformed coefficients must be positive")
        out = rep.copy()
        out[self.exp_mask] = np.log(out[self.exp_mask])
        return out

    def jacobian_diag(self, theta: np.ndarray) -> np.ndarray:
        # d(reported)/d(theta) for elementwise transforms
        jac = np.ones(self.n_free)
        jac[self.exp_mask] = np.exp(np.minimum(theta[self.exp_mask], _THETA_CAP))
        return jac

    def split(self, rep: np.ndarray):
        spec = self.spec
        i = self.n_mean
        b = rep[:i]
        omega = float(rep[i])
        i += 1
        alpha = rep[i: i + spec.p]
        i += spec.p
        gamma = rep[i: i + self.n_gamma] if self.n_gamma else None
        i += self.n_gamma
        beta = rep[i: i + spec.q]
        i += spec.q
        delta = rep[i:]
        return b, omega, alpha, gamma, beta, delta

    def params(self, theta: np.ndarray) -> ParamVector:
        b, omega, alpha, gamma, beta, delta = self.split(self.reported(theta))
        return ParamVector(b=b, omega=omega, alpha=alpha, beta=beta, gamma=gamma, delta=delta)

    def rep_from_params(self, params: ParamVector) -> np.ndarray:
        parts = [params.b, [params.omega], params.alpha]
        if self.n_gamma:
            parts.append(params.gamma if params.gamma is not None else np.zeros(self.spec.p))
        parts.append(params.beta)
        parts.append(params.delta)
        return np.concatenate([np.atleast_1d(np.asarray(p, dtype=float)) for p in parts])


class _Problem:
    """Design matrices plus the likelihood machinery for one (spec, panel) pair."""

    def __init__(self, spec: ModelSpec, panel: Panel):
        y, Z, X, mean_names, var_names = build_design(spec, panel)
        self.spec = spec
        self.y = y
        self.Z = Z
        self.X = X
        self.n_obs = len(y)
        self.par = _Parameterization(spec, mean_names, var_names)
        self.is_log_family = spec.family is VarianceFamily.LOG_EGARCH
        self._zero_xdot = [0.0] * self.n_obs

    def path(self, theta: np.ndarray) -> tuple[np.ndarray, VariancePath]:
        b, omega, alpha, gamma, beta, delta = self.par.split(self.par.reported(theta))
        eps = self.y - self.Z @ b if self.Z.size else self.y.copy()
        xdot = (self.X @ delta).tolist() if self.X.size else self._zero_xdot
        h_init = float(np.var(eps))
        if h_init <= 0.0:
            h_init = VARIANCE_FLOOR
        gamma_list = gamma.tolist() if gamma is not None else [0.0] * self.spec.p
        if self.is_log_family:
            h, diverged = _egarch_path(omega, alpha.tolist(), gamma_list,
                                       beta.tolist(), eps.tolist(), xdot, h_init)
            clamped, penalty = 0, 0.0
        else:
            e2 = (eps * eps).tolist()
            neg = (eps < 0.0).tolist()
            h, clamped, penalty, diverged = _garch_path(
                omega, alpha.tolist(), gamma_list, beta.tolist(),
                e2, neg, xdot, h_init, VARIANCE_FLOOR,
            )
        return eps, VariancePath(residuals=eps, variance=h, clamped=clamped,
                                 clamp_penalty=penalty, diverged=diverged)

    def loglik_obs(self, theta: np.ndarray) -> np.ndarray:
        eps, path = self.path(theta)
        if path.diverged:
            return np.full(self.n_obs, -np.inf)
        h = path.variance
        return -0.5 * (LOG_2PI + np.log(h) + eps * eps / h)

    def neg_loglik(self, theta: np.ndarray) -> float:
        eps, path = self.path(theta)
        if path.diverged:
            return np.inf
        h = path.variance
        core = -0.5 * float(self.n_obs * LOG_2PI + np.log(h).sum() + (eps * eps / h).sum())
        if not math.isfinite(core):
            return np.inf
        return -(core - CLAMP_PENALTY_WEIGHT * path.clamp_penalty)

    def starting_points(self, options: FitOptions) -> list[np.ndarray]:
        spec = self.spec
        if options.initial_params is not None:
            base = self.par.theta_from_reported(self.par.rep_from_params(options.initial_params))
        else:
            if self.Z.size:
                b0 = np.linalg.lstsq(self.Z, self.y, rcond=None)[0]
                resid = self.y - self.Z @ b0
            else:
                b0 = np.empty(0)
                resid = self.y
            v = max(float(np.var(resid)), VARIANCE_FLOOR)
            p, q, ng = spec.p, spec.q, self.par.n_gamma
            if self.is_log_family:
                beta0 = np.full(q, 0.9 / q) if q else np.empty(0)
                core = np.concatenate([
                    [math.log(v) * (1.0 - beta0.sum())],
                    np.full(p, 0.1 / p) if p else np.empty(0),
                    np.zeros(ng),
                    beta0,
                ])
            else:
                alpha0 = np.full(p, 0.08 / p) if p else np.empty(0)
                beta0 = np.full(q, 0.82 / q) if q else np.empty(0)
                gamma0 = np.full(ng, 0.02 / ng) if ng else np.empty(0)
                load = alpha0.sum() + beta0.sum() + 0.5 * gamma0.sum()
                omega0 = v * max(1.0 - load, 0.05)
                core = np.log(np.concatenate([[omega0], alpha0, gamma0, beta0]))
            base = np.concatenate([b0, core, np.zeros(self.par.n_var)])

        rng = np.random.default_rng(options.jitter_seed)
        starts = [base]
        for _ in range(max(options.n_starts, 1) - 1):
            step = rng.uniform(-1.0, 1.0, size=len(base)) * (0.3 * np.abs(base) + 0.2)
            starts.append(base + step)
        return starts


def _solve_or_pinv(a: np.ndarray):
    """Inverse of A, falling back to the pseudo-inverse when singular."""
    try:
        inv = np.linalg.inv(a)
        if not np.all(np.isfinite(inv)):
            raise np.linalg.LinAlgError
        return inv, False
    except np.linalg.LinAlgError:
        return np.linalg.pinv(a), True


def _sandwich(problem: _Problem, theta: np.ndarray,
              h_score: float = 1e-5, h_hess: float = 1e-4):
    """Sandwich covariance of the reported coefficients at the optimum theta."""
    n, k = problem.n_obs, problem.par.n_free
    scores = np.empty((n, k))
    for i in range(k):
        hi = max(h_score * abs(theta[i]), h_score)
        tp, tm = theta.copy(), theta.copy()
        tp[i] += hi
        tm[i] -= hi
        lp, lm = problem.loglik_obs(tp), problem.loglik_obs(tm)
        if not (np.all(np.isfinite(lp)) and np.all(np.isfinite(lm))):
            raise EstimationError("non-finite log-density inside the score stencil")
        scores[:, i] = (lp - lm) / (2.0 * hi)

    total = lambda th: float(problem.loglik_obs(th).sum())
    hess = finite_diff_hessian(total, theta, h_hess)
    a_mat = -hess / n
    b_mat = scores.T @ scores / n
    a_inv, singular = _solve_or_pinv(a_mat)
    cov_theta = a_inv @ b_mat @ a_inv / n

    jac = problem.par.jacobian_diag(theta)
    cov = cov_theta * np.outer(jac, jac)
    cov = 0.5 * (cov + cov.T)
    d = np.diag(cov).copy()
    d[d < 0] = 0.0  # roundoff guard; the sandwich is PSD in exact arithmetic
    np.fill_diagonal(cov, d)
    return cov, singular


def bw_robust_covariance(spec: ModelSpec, params: ParamVector, panel: Panel) -> np.ndarray:
    """Sandwich covariance matrix of the reported coefficients at ``params``.

    ``params`` should be an interior local optimum of the likelihood.
    A singular Hessian triggers a pseudo-inverse and a warning.
    """
    params.validate(spec)
    problem = _Problem(spec, panel)
    theta = problem.par.theta_from_reported(problem.par.rep_from_params(params))
    cov, singular = _sandwich(problem, theta)
    if singular:
        warnings.warn("singular Hessian in sandwich covariance; pseudo-inverse used", stacklevel=2)
    return cov


def _check_rank(problem: _Problem) -> None:
    if problem.Z.size and np.linalg.matrix_rank(problem.Z) < problem.Z.shape[1]:
        raise EstimationError("rank-deficient mean regressor matrix")
    if problem.X.size:
        with_const = np.column_stack([np.ones(problem.n_obs), problem.X])
        if np.linalg.matrix_rank(with_const) < with_const.shape[1]:
            raise EstimationError("rank-deficient variance regressor matrix")


def fit(spec: ModelSpec, panel: Panel, options: FitOptions | None = None) -> FitResult:
    """Fit the model by Gaussian QMLE with the configured multi-start schedule.

    Returns the best local optimum found; a non-converged result still
    carries full diagnostics with ``converged=False``.
    """
    options = options or FitOptions()
    problem = _Problem(spec, panel)
    k = problem.par.n_free
    if problem.n_obs < 10 * k:
        raise EstimationError(
            f"usable sample {problem.n_obs} too short for {k} free parameters (need >= {10 * k})"
        )
    _check_rank(problem)

    candidates = []  # (nll, theta, success flag, iterations)
    starts = problem.starting_points(options)
    for theta0 in starts:
        if not math.isfinite(problem.neg_loglik(theta0)):
            continue
        res = minimize(
            problem.neg_loglik, theta0, method="Nelder-Mead",
            options=dict(
                maxfev=options.max_evals_per_start,
                fatol=options.loglik_tol,
                xatol=options.param_tol,
                adaptive=True,
            ),
        )
        if math.isfinite(res.fun):
            candidates.append([res.fun, res.x, bool(res.success), int(res.nit)])
    if not candidates:
        raise EstimationError("all starts diverged")

    candidates.sort(key=lambda c: c[0])
    best = candidates[0]
    for cand in candidates[: max(options.polish_top, 1)]:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # line-search warnings near inf are expected
            pol = minimize(problem.neg_loglik, cand[1], method="BFGS",
                           options=dict(maxiter=200, gtol=1e-7))
        if math.isfinite(pol.fun) and pol.fun <= cand[0]:
            polished = [pol.fun, pol.x, cand[2] or bool(pol.success), cand[3] + int(pol.nit)]
            if polished[0] <= best[0]:
                best = polished
        elif cand[0] <= best[0]:
            best = cand

    nll, theta_hat, converged, iterations = best
    params = problem.par.params(theta_hat)
    eps, path = problem.path(theta_hat)
    if path.clamped:
        warnings.warn(f"variance floor clamped {path.clamped} observations at the optimum", stacklevel=2)
    estimates = problem.par.reported(theta_hat)

    try:
        cov, singular = _sandwich(problem, theta_hat)
        if singular:
            warnings.warn("singular Hessian in sandwich covariance; pseudo-inverse used",
                          stacklevel=2)
    except EstimationError as exc:
        # optimum on the edge of the computable region: keep the fit, flag inference
        warnings.warn(f"robust covariance unavailable: {exc}", stacklevel=2)
        cov, singular = np.full((k, k), np.nan), True
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, estimates / se, np.nan)
    pvals = np.array([p_value(v) if np.isfinite(v) else np.nan for v in z])

    return FitResult(
        spec=spec,
        param_names=list(problem.par.names),
        estimates=estimates,
        params=params,
        loglik=-nll,
        robust_cov=cov,
        std_errors=se,
        z_stats=z,
        p_values=pvals,
        variance_path=path,
        standardized_residuals=eps / np.sqrt(path.variance),
        persistence=persistence(spec, params),
        converged=converged,
        iterations=iterations,
        restarts=len(starts),
        n_obs=problem.n_obs,
        n_mean=problem.par.n_mean,
        cov_warning=singular,
    )
