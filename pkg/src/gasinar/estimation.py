"""Maximum-likelihood fitting, standard errors, AIC and likelihood-ratio tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, stats
from scipy.special import gammaln

from gasinar import _kernels
from gasinar.distributions import NegativeBinomial, Poisson
from gasinar.exceptions import (
    NoSurvivalInformationError,
    NotNestedError,
    ParameterDomainError,
)
from gasinar.filter import GasParams, as_counts
from gasinar.models import (
    MODEL_KINDS,
    GasInar,
    ModelSpec,
    RcInar,
    StaticInar,
    kind_of,
    model_to_dict,
)
from gasinar.score import log_factorials, logit

__all__ = [
    "FitOptions",
    "FitResult",
    "LRTest",
    "param_names",
    "to_unconstrained",
    "from_unconstrained",
    "to_natural",
    "from_natural",
    "natural_jacobian",
    "start_values",
    "fit",
    "hessian",
    "hessian_std_errors",
    "std_errors",
    "natural_std_errors",
    "lr_test",
    "lr_pvalue",
    "NESTED_DF",
]

MIN_FIT_LENGTH = 10
_BAD_OBJECTIVE = 1e10

NESTED_DF = {
    ("inar-poisson", "gas-poisson"): 2,
    ("inar-negbin", "gas-negbin"): 2,
    ("inar-poisson", "rc-poisson"): 1,
    ("inar-negbin", "rc-negbin"): 1,
}


def _split_kind(kind: str) -> tuple[str, str]:
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    prefix, _, family = kind.partition("-")
    return prefix, family


def param_names(kind: str) -> list[str]:
    prefix, family = _split_kind(kind)
    head = {"gas": ["omega", "beta", "tau"], "inar": ["alpha"], "rc": ["omega", "tau"]}[prefix]
    tail = ["mu", "sigma2"] if family == "negbin" else ["mu"]
    return head + tail


# --------------------------------------------------------------------------
# parameter maps


def to_natural(model: ModelSpec) -> np.ndarray:
    if isinstance(model, GasInar):
        p = model.params
        head = [p.omega, p.beta, p.tau]
    elif isinstance(model, StaticInar):
        head = [model.alpha]
    else:
        head = [model.omega, model.tau]
    err = model.error
    tail = [err.mean, err.variance] if isinstance(err, NegativeBinomial) else [err.mean]
    return np.array(head + tail, dtype=float)


def from_natural(kind: str, x: Sequence[float]) -> ModelSpec:
    prefix, family = _split_kind(kind)
    x = [float(v) for v in x]
    if len(x) != len(param_names(kind)):
        raise ValueError(f"{kind} takes {len(param_names(kind))} parameters, got {len(x)}")
    if family == "poisson":
        error = Poisson(x[-1])
        head = x[:-1]
    else:
        error = NegativeBinomial(x[-2], x[-1])
        head = x[:-2]
    if prefix == "gas":
        return GasInar(GasParams(head[0], head[1], head[2], error))
    if prefix == "inar":
        return StaticInar(head[0], error)
    return RcInar(head[0], head[1], error)


def to_unconstrained(model: ModelSpec) -> np.ndarray:
    """Map a model to an unconstrained real vector.

    omega and tau are unchanged, beta -> atanh(beta), static alpha -> logit,
    mu -> log(mu), and a negative binomial variance -> log(sigma2 - mu).
    """
    kind = kind_of(model)
    x = to_natural(model)
    prefix, family = _split_kind(kind)
    v = x.copy()
    if prefix == "gas":
        v[1] = math.atanh(x[1])
    elif prefix == "inar":
        v[0] = logit(x[0])
    if family == "poisson":
        v[-1] = math.log(x[-1])
    else:
        v[-2] = math.log(x[-2])
        v[-1] = math.log(x[-1] - x[-2])
    return v


# NB size cap: beyond it the pmf equals the Poisson limit to ~1e-6, and a
# smaller variance excess would be lost to rounding in mu + excess
MAX_NB_SIZE = 1e6


def _floor_log_excess(log_mu: float, log_excess: float) -> float:
    return max(log_excess, 2.0 * log_mu - math.log(MAX_NB_SIZE))


def _natural_from_vector(kind: str, v: np.ndarray) -> np.ndarray:
    prefix, family = _split_kind(kind)
    v = np.asarray(v, dtype=float)
    if v.size != len(param_names(kind)):
        raise ValueError(f"{kind} takes {len(param_names(kind))} parameters, got {v.size}")
    x = v.copy()
    if prefix == "gas":
        x[1] = math.tanh(v[1])
    elif prefix == "inar":
        x[0] = 1.0 / (1.0 + math.exp(-v[0]))
    if family == "poisson":
        x[-1] = math.exp(v[-1])
    else:
        x[-2] = math.exp(v[-2])
        x[-1] = x[-2] + math.exp(_floor_log_excess(v[-2], v[-1]))
    return x


def from_unconstrained(kind: str, v: Sequence[float]) -> ModelSpec:
    return from_natural(kind, _natural_from_vector(kind, np.asarray(v, dtype=float)))


def natural_jacobian(kind: str, v: Sequence[float]) -> np.ndarray:
    """Jacobian of the natural parameters with respect to the unconstrained ones."""
    prefix, family = _split_kind(kind)
    v = np.asarray(v, dtype=float)
    x = _natural_from_vector(kind, v)
    jac = np.eye(v.size)
    if prefix == "gas":
        jac[1, 1] = 1.0 - x[1] ** 2
    elif prefix == "inar":
        jac[0, 0] = x[0] * (1.0 - x[0])
    if family == "poisson":
        jac[-1, -1] = x[-1]
    else:
        jac[-2, -2] = x[-2]
        jac[-1, -2] = x[-2]
        jac[-1, -1] = x[-1] - x[-2]
    return jac


# --------------------------------------------------------------------------
# objective


def _loglik_function(kind: str, y: np.ndarray) -> Callable[[np.ndarray], float]:
    """Summed log-likelihood as a function of the unconstrained vector."""
    prefix, family = _split_kind(kind)
    ymax = int(y.max())
    lfact = log_factorials(ymax)
    x_int = np.arange(ymax + 1, dtype=float)
    yprev = y[:-1].astype(float)
    contrib = np.empty(y.size - 1)
    lg_x1 = gammaln(x_int + 1.0)
    bound = _kernels.LOGIT_BOUND

    def loglik(v: np.ndarray) -> float:
        if not np.all(np.isfinite(v)):
            return -np.inf
        try:
            if family == "poisson":
                mu = math.exp(v[-1])
                logpe = x_int * math.log(mu) - mu - lg_x1
            else:
                mu = math.exp(v[-2])
                excess = math.exp(_floor_log_excess(v[-2], v[-1]))
                r = mu * mu / excess
                log_var = math.log(mu + excess)
                logpe = (gammaln(x_int + r) - gammaln(r) - lg_x1
                         + r * (v[-2] - log_var) + x_int * (math.log(excess) - log_var))
        except OverflowError:
            return -np.inf
        if prefix == "gas":
            beta = math.tanh(v[1])
            if not abs(beta) < 1.0:
                return -np.inf
            return _kernels.gas_loglik(y, v[0], beta, v[2], v[0] / (1.0 - beta), logpe, lfact)
        if prefix == "inar":
            lam = min(max(v[0], -bound), bound)
            return _kernels.gas_loglik(y, lam, 0.0, 0.0, lam, logpe, lfact)
        lam = np.clip(v[0] + v[1] * yprev, -bound, bound)
        return _kernels.path_loglik(y, lam, logpe, lfact, contrib)

    return loglik


def _natural_loglik_function(kind: str, y: np.ndarray) -> Callable[[np.ndarray], float]:
    inner = _loglik_function(kind, y)

    def loglik(x: np.ndarray) -> float:
        try:
            model = from_natural(kind, x)
        except ParameterDomainError:
            return -np.inf
        return inner(to_unconstrained(model))

    return loglik


# --------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class FitOptions:
    restarts: int = 5
    max_iter: int = 2000
    tol: float = 1e-9
    seed: int = 0
    jitter: float = 0.3
    compute_se: bool = True
    nested_start: bool = True

    def __post_init__(self) -> None:
        if self.restarts < 1 or self.max_iter < 1 or not self.tol > 0 or self.jitter < 0:
            raise ValueError("fit options must be positive")

    def to_dict(self) -> dict:
        return {
            "restarts": self.restarts,
            "max_iter": self.max_iter,
            "tol": self.tol,
            "seed": self.seed,
            "jitter": self.jitter,
            "nested_start": self.nested_start,
        }


@dataclass
class FitResult:
    kind: str
    model: ModelSpec
    theta: np.ndarray  # unconstrained optimum
    loglik_sum: float
    loglik_avg: float
    aic: float
    n_params: int
    n_obs: int
    converged: bool
    std_errors: dict | None = None
    covariance: np.ndarray | None = None  # unconstrained, inverse negative Hessian
    optimizer_trace: dict = field(default_factory=dict)
    options: FitOptions = field(default_factory=FitOptions)

    @property
    def params(self) -> dict:
        return dict(zip(param_names(self.kind), to_natural(self.model).tolist()))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "model": model_to_dict(self.model),
            "params": self.params,
            "std_errors": self.std_errors,
            "std_errors_available": self.std_errors is not None,
            "loglik_sum": self.loglik_sum,
            "loglik_avg": self.loglik_avg,
            "aic": self.aic,
            "n_params": self.n_params,
            "n_obs": self.n_obs,
            "converged": self.converged,
            "optimizer": self.optimizer_trace,
            "options": self.options.to_dict(),
        }


@dataclass(frozen=True)
class LRTest:
    statistic: float
    df: int
    pvalue: float

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "df": self.df, "pvalue": self.pvalue}


# --------------------------------------------------------------------------
# fitting


def _moments(y: np.ndarray) -> tuple[float, float, float]:
    mean = float(y.mean())
    var = float(y.var())
    d = y - mean
    denom = float(np.dot(d, d))
    r1 = float(np.dot(d[1:], d[:-1]) / denom) if denom > 0 else 0.0
    return mean, var, r1


def start_values(kind: str, series) -> np.ndarray:
    """Moment-based starting point in the unconstrained space."""
    y = as_counts(series)
    prefix, family = _split_kind(kind)
    mean, var, r1 = _moments(y)
    a0 = min(max(r1, 0.05), 0.95)
    mu0 = max(mean * (1.0 - a0), 0.1)
    if prefix == "gas":
        beta0 = 0.9
        head = [logit(a0) * (1.0 - beta0), math.atanh(beta0), 0.05]
    elif prefix == "inar":
        head = [logit(a0)]
    else:
        head = [logit(a0), 0.0]
    if family == "poisson":
        tail = [math.log(mu0)]
    else:
        # innovation variance implied by the INAR(1) stationary variance
        s2 = var * (1.0 - a0 * a0) - a0 * (1.0 - a0) * mean
        s2 = max(s2, 1.5 * mu0)
        tail = [math.log(mu0), math.log(s2 - mu0)]
    return np.array(head + tail, dtype=float)


def _check_informative(kind: str, y: np.ndarray) -> None:
    prefix, _ = _split_kind(kind)
    if prefix in ("gas", "rc") and (np.all(y == 0) or np.all(y == y[0])):
        raise NoSurvivalInformationError(
            f"series is {'all zeros' if y[0] == 0 else 'constant'}; "
            f"{kind} survival dynamics are not identified"
        )


def _nested_start(kind: str, y: np.ndarray, options: FitOptions) -> np.ndarray:
    """The static INAR optimum embedded in ``kind`` (beta = tau = 0)."""
    prefix, family = _split_kind(kind)
    static = fit(f"inar-{family}", y, FitOptions(restarts=1, max_iter=options.max_iter, tol=options.tol,
                                                  compute_se=False))
    v = static.theta
    head = [v[0], 0.0, 0.0] if prefix == "gas" else [v[0], 0.0]
    return np.concatenate([head, v[1:]])


def _nelder_mead(obj, x0: np.ndarray, options: FitOptions):
    return optimize.minimize(
        obj,
        x0,
        method="Nelder-Mead",
        options={"maxiter": options.max_iter, "xatol": 1e-7, "fatol": options.tol},
    )


def fit(
    kind: str,
    series,
    options: FitOptions | None = None,
    extra_starts: Sequence[np.ndarray] = (),
) -> FitResult:
    """Fit ``kind`` by maximum likelihood with a multistart Nelder-Mead search.

    Restart ``i`` starts from the moment-based values plus Gaussian jitter
    drawn from a stream seeded by ``(seed, i)``; restart 0 is unjittered.
    ``extra_starts`` (unconstrained vectors, e.g. a previous optimum) are
    tried in addition, as is the static INAR optimum for GAS and rc kinds
    (``options.nested_start``), so those fits never fall below the nested
    static likelihood. The best optimum is then re-polished until the
    objective stops improving by more than ``tol``.
    """
    options = options or FitOptions()
    y = as_counts(series, min_length=MIN_FIT_LENGTH)
    _check_informative(kind, y)
    n = y.size - 1
    loglik = _loglik_function(kind, y)

    def objective(v):
        val = loglik(v)
        if not math.isfinite(val):
            return _BAD_OBJECTIVE
        return -val / n

    base = start_values(kind, y)
    starts = [np.asarray(s, dtype=float) for s in extra_starts]
    if options.nested_start and not kind.startswith("inar"):
        starts.append(_nested_start(kind, y, options))
    for i in range(options.restarts):
        if i == 0:
            starts.append(base)
        else:
            rng = np.random.default_rng([options.seed, i])
            starts.append(base + options.jitter * rng.standard_normal(base.size))

    best = None
    nit = nfev = 0
    for x0 in starts:
        res = _nelder_mead(objective, x0, options)
        nit += res.nit
        nfev += res.nfev
        if best is None or res.fun < best.fun:
            best = res

    converged = bool(best.success)
    polishes = 0
    for polishes in range(1, 6):
        res = _nelder_mead(objective, best.x, options)
        nit += res.nit
        nfev += res.nfev
        improvement = best.fun - res.fun
        if res.fun < best.fun:
            best = res
        converged = bool(res.success) and improvement < options.tol
        if improvement < options.tol:
            break

    theta = np.asarray(best.x, dtype=float)
    if kind.endswith("negbin"):
        theta[-1] = _floor_log_excess(theta[-2], theta[-1])
    model = from_unconstrained(kind, theta)
    total = float(loglik(theta))
    k = theta.size
    result = FitResult(
        kind=kind,
        model=model,
        theta=theta,
        loglik_sum=total,
        loglik_avg=total / n,
        aic=2.0 * k - 2.0 * total,
        n_params=k,
        n_obs=n,
        converged=converged and best.fun < _BAD_OBJECTIVE,
        optimizer_trace={
            "iterations": int(nit),
            "function_evaluations": int(nfev),
            "restarts": options.restarts,
            "extra_starts": len(starts) - options.restarts,
            "polishes": polishes,
            "best_objective": float(best.fun),
        },
        options=options,
    )
    if options.compute_se:
        attach_std_errors(result, y)
    return result


# --------------------------------------------------------------------------
# standard errors


def hessian(fun: Callable[[np.ndarray], float], x: Sequence[float], rel_step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian with steps ``rel_step * (1 + |x_i|)``."""
    x = np.asarray(x, dtype=float)
    k = x.size
    h = rel_step * (1.0 + np.abs(x))
    f0 = fun(x)
    H = np.empty((k, k))
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        H[i, i] = (fun(x + ei) - 2.0 * f0 + fun(x - ei)) / (h[i] * h[i])
        for j in range(i):
            ej = np.zeros(k)
            ej[j] = h[j]
            val = (
                fun(x + ei + ej) - fun(x + ei - ej) - fun(x - ei + ej) + fun(x - ei - ej)
            ) / (4.0 * h[i] * h[j])
            H[i, j] = H[j, i] = val
    return H


def hessian_std_errors(
    loglik: Callable[[np.ndarray], float], x: Sequence[float]
) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Standard errors and covariance from the observed information at ``x``.

    Returns ``(None, None)`` when the negative Hessian is not positive definite.
    """
    H = hessian(loglik, x)
    info = -0.5 * (H + H.T)
    if not np.all(np.isfinite(info)):
        return None, None
    try:
        np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        return None, None
    cov = np.linalg.inv(info)
    cov = 0.5 * (cov + cov.T)
    return np.sqrt(np.diag(cov)), cov


def _delta_method(fit_result: FitResult, series) -> tuple[dict | None, np.ndarray | None]:
    y = as_counts(series, min_length=MIN_FIT_LENGTH)
    _, cov = hessian_std_errors(_loglik_function(fit_result.kind, y), fit_result.theta)
    if cov is None:
        return None, None
    jac = natural_jacobian(fit_result.kind, fit_result.theta)
    se = np.sqrt(np.clip(np.diag(jac @ cov @ jac.T), 0.0, None))
    return dict(zip(param_names(fit_result.kind), se.tolist())), cov


def std_errors(fit_result: FitResult, series) -> dict | None:
    """Delta-method standard errors of the natural parameters, or None."""
    return _delta_method(fit_result, series)[0]


def attach_std_errors(fit_result: FitResult, series) -> FitResult:
    fit_result.std_errors, fit_result.covariance = _delta_method(fit_result, series)
    return fit_result


def natural_std_errors(fit_result: FitResult, series) -> dict | None:
    """Standard errors from a Hessian taken directly in the natural parameters."""
    y = as_counts(series, min_length=MIN_FIT_LENGTH)
    se, _ = hessian_std_errors(
        _natural_loglik_function(fit_result.kind, y), to_natural(fit_result.model)
    )
    if se is None:
        return None
    return dict(zip(param_names(fit_result.kind), se.tolist()))


# --------------------------------------------------------------------------
# likelihood-ratio test


def lr_pvalue(statistic: float, df: int) -> float:
    return float(stats.chi2.sf(max(statistic, 0.0), df))


def lr_test(restricted: FitResult, full: FitResult) -> LRTest:
    """Likelihood-ratio test of ``restricted`` nested in ``full``."""
    key = (restricted.kind, full.kind)
    if key not in NESTED_DF:
        raise NotNestedError(f"{restricted.kind} is not nested in {full.kind}")
    df = NESTED_DF[key]
    stat = max(2.0 * (full.loglik_sum - restricted.loglik_sum), 0.0)
    return LRTest(stat, df, lr_pvalue(stat, df))
