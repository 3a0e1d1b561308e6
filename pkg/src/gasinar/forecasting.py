"""Probabilistic forecasts: exact one-step pmfs and simulated h-step pmfs."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from gasinar import _kernels
from gasinar.distributions import ErrorSpec, log_pmf_table, sample, support_size
from gasinar.exceptions import InputError, ParameterDomainError
from gasinar.filter import GasParams, as_counts
from gasinar.models import GasInar, ModelSpec, RcInar, StaticInar, next_logit
from gasinar.score import log_factorials, logistic, logit

__all__ = [
    "ForecastDistribution",
    "forecast_exact_1",
    "forecast_mc",
    "forecast_model",
    "forecast_scores",
    "simulate_paths",
    "static_point_forecast",
]

MIN_DRAWS = 1000


@dataclass
class ForecastDistribution:
    """Forecast pmf of ``y_{T+h}`` on ``0..len(pmf)-1``.

    ``n_draws`` is 0 for exact pmfs. ``method`` is ``"exact"``,
    ``"empirical"`` (draw frequencies) or ``"mixture"`` (average of the
    simulated one-step conditional pmfs at the last step).
    """

    horizon: int
    pmf: np.ndarray
    point_mean: float
    point_median: int
    n_draws: int = 0
    seed: int | None = None
    method: str = "exact"

    def prob(self, x: int) -> float:
        if 0 <= x < self.pmf.size:
            return float(self.pmf[x])
        return 0.0

    def log_prob(self, x: int) -> float:
        p = self.prob(x)
        return math.log(p) if p > 0 else -math.inf

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "method": self.method,
            "point_mean": self.point_mean,
            "point_median": self.point_median,
            "n_draws": self.n_draws,
            "seed": self.seed,
            "pmf": self.pmf.tolist(),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "probability"])
        for x, p in enumerate(self.pmf):
            w.writerow([x, repr(float(p))])
        return buf.getvalue()


def _median_from_pmf(pmf: np.ndarray) -> int:
    cdf = np.cumsum(pmf)
    return int(np.searchsorted(cdf, 0.5 - 1e-12))


def forecast_exact_1(y_T: int, alpha_next: float, spec: ErrorSpec) -> ForecastDistribution:
    """Exact one-step pmf: Binomial(y_T, alpha_next) survivors plus an error draw.

    ``alpha_next`` is the survival probability the filter assigns to period
    T+1 (for GAS models, ``FilterPath.alpha_next``).
    """
    if not 0.0 < alpha_next < 1.0:
        raise ParameterDomainError(f"alpha must lie strictly inside (0, 1), got {alpha_next}")
    if y_T < 0 or int(y_T) != y_T:
        raise InputError(f"y_T must be a non-negative integer, got {y_T}")
    y_T = int(y_T)
    lam = float(np.clip(logit(alpha_next), -_kernels.LOGIT_BOUND, _kernels.LOGIT_BOUND))
    size = support_size(spec, shift=y_T)
    pmf = np.empty(size)
    _kernels.predictive_pmf_row(y_T, lam, log_pmf_table(spec, size), log_factorials(max(size, y_T)), pmf)
    return ForecastDistribution(
        horizon=1,
        pmf=pmf,
        point_mean=alpha_next * y_T + spec.mean,
        point_median=_median_from_pmf(pmf),
    )


def _update_logit(model: ModelSpec, y_new, y_old, lam, tables):
    if isinstance(model, StaticInar):
        return lam
    if isinstance(model, RcInar):
        return np.clip(model.omega + model.tau * y_new, -_kernels.LOGIT_BOUND, _kernels.LOGIT_BOUND)
    p = model.params
    logpe, lfact = tables(int(max(y_new.max(), y_old.max())))
    s = np.empty(y_new.size)
    _kernels.score_batch(y_new, y_old, lam, logpe, lfact, s)
    return np.clip(p.omega + p.beta * lam + p.tau * s, -_kernels.LOGIT_BOUND, _kernels.LOGIT_BOUND)


class _Tables:
    """Grow-on-demand log factorial and error log-pmf tables."""

    def __init__(self, error: ErrorSpec, size: int = 128):
        self.error = error
        self._build(size)

    def _build(self, size: int) -> None:
        self.size = size
        self.logpe = log_pmf_table(self.error, size)
        self.lfact = log_factorials(size)

    def __call__(self, need: int):
        if need >= self.size:
            self._build(2 * need + 1)
        return self.logpe, self.lfact


def simulate_paths(
    model: ModelSpec, y_T: int, lam_next: float, h: int, B: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Simulate ``B`` future paths of length ``h``.

    Returns ``(y, y_prev_last, lam_last)``: the draws of ``y_{T+h}`` and, for
    each path, the count and logit survival probability that generated it.
    """
    tables = _Tables(model.error)
    y = np.full(B, int(y_T), dtype=np.int64)
    lam = np.full(B, float(lam_next))
    y_prev = y
    lam_last = lam
    for k in range(h):
        surv = rng.binomial(y, logistic(lam))
        eps = np.asarray(sample(model.error, rng, size=B), dtype=np.int64)
        y_new = surv + eps
        y_prev, lam_last = y, lam
        if k < h - 1:
            lam = _update_logit(model, y_new, y, lam, tables)
        y = y_new
    return y, y_prev, lam_last


def _from_draws(draws: np.ndarray, h: int, seed) -> ForecastDistribution:
    counts = np.bincount(draws)
    B = draws.size
    pmf = counts / B
    median = int(np.searchsorted(np.cumsum(counts) * 2, B))
    return ForecastDistribution(
        horizon=h,
        pmf=pmf,
        point_mean=float(draws.mean()),
        point_median=median,
        n_draws=B,
        seed=seed,
        method="empirical",
    )


def _mixture(model: ModelSpec, draws, y_prev, lam_last, h, seed) -> ForecastDistribution:
    size = max(int(draws.max()) + 1, support_size(model.error, shift=int(y_prev.max())))
    pmf = np.empty(size)
    _kernels.mixture_pmf(
        y_prev, lam_last, log_pmf_table(model.error, size), log_factorials(max(size, int(y_prev.max()))), pmf
    )
    mean = float(np.mean(logistic(lam_last) * y_prev) + model.error.mean)
    return ForecastDistribution(
        horizon=h,
        pmf=pmf,
        point_mean=mean,
        point_median=_median_from_pmf(pmf),
        n_draws=draws.size,
        seed=seed,
        method="mixture",
    )


def _rng(rng) -> tuple[np.random.Generator, int | None]:
    if isinstance(rng, np.random.Generator):
        return rng, None
    if isinstance(rng, (list, tuple)):
        return np.random.default_rng([int(v) for v in rng]), None
    return np.random.default_rng(int(rng)), int(rng)


def forecast_mc(
    y_T: int,
    alpha_next: float,
    params: GasParams,
    h: int,
    B: int,
    rng,
    method: str = "empirical",
) -> ForecastDistribution:
    """Simulated ``h``-step forecast pmf for a GAS-INAR model.

    Each path draws survivors and an error term, then moves the survival
    probability with the score recursion. ``method="empirical"`` returns the
    draw frequencies; ``"mixture"`` averages the exact conditional pmf of the
    last step over paths, which has full support.
    """
    if h < 1:
        raise ValueError(f"horizon must be >= 1, got {h}")
    if B < MIN_DRAWS:
        raise ValueError(f"need at least {MIN_DRAWS} draws, got {B}")
    if not 0.0 < alpha_next < 1.0:
        raise ParameterDomainError(f"alpha must lie strictly inside (0, 1), got {alpha_next}")
    rng, seed = _rng(rng)
    model = GasInar(params)
    lam = float(np.clip(logit(alpha_next), -_kernels.LOGIT_BOUND, _kernels.LOGIT_BOUND))
    draws, y_prev, lam_last = simulate_paths(model, int(y_T), lam, h, B, rng)
    if method == "empirical":
        return _from_draws(draws, h, seed)
    if method == "mixture":
        return _mixture(model, draws, y_prev, lam_last, h, seed)
    raise ValueError(f"unknown method {method!r}")


def forecast_model(
    model: ModelSpec, series, h: int, B: int = 2000, rng=0, method: str = "mixture"
) -> ForecastDistribution:
    """Forecast ``h`` steps past the end of ``series`` with any model.

    ``h = 1`` is always exact; longer horizons are simulated.
    """
    y = as_counts(series)
    lam = next_logit(model, y)
    if h == 1:
        return forecast_exact_1(int(y[-1]), float(logistic(lam)), model.error)
    rng, seed = _rng(rng)
    draws, y_prev, lam_last = simulate_paths(model, int(y[-1]), lam, h, B, rng)
    if method == "empirical":
        return _from_draws(draws, h, seed)
    return _mixture(model, draws, y_prev, lam_last, h, seed)


def static_point_forecast(y_T: float, alpha: float, mu: float, h: int) -> float:
    """Conditional mean ``alpha^h y_T + mu (1 - alpha^h) / (1 - alpha)`` of a static INAR(1)."""
    if h < 1:
        raise ValueError(f"horizon must be >= 1, got {h}")
    if not 0.0 <= alpha < 1.0:
        raise ParameterDomainError(f"alpha must lie in [0, 1), got {alpha}")
    ah = alpha**h
    return ah * y_T + mu * (1.0 - ah) / (1.0 - alpha)


def forecast_scores(model: ModelSpec, series, actuals, B: int = 2000, rng=0) -> tuple[np.ndarray, np.ndarray]:
    """Point forecasts and log predictive probabilities of ``actuals``.

    ``actuals[h - 1]`` is the realized ``y_{T+h}``. Horizon 1 is exact; later
    horizons use the mixture estimator from one set of ``B`` simulated paths.
    Returns ``(point_means, log_probs)``.
    """
    y = as_counts(series)
    actuals = [int(a) for a in actuals]
    h_max = len(actuals)
    rng, _ = _rng(rng)
    tables = _Tables(model.error, size=max(128, 2 * max(actuals + [int(y.max())]) + 1))
    means = np.empty(h_max)
    logp = np.empty(h_max)
    cur = np.full(B, int(y[-1]), dtype=np.int64)
    lam = np.full(B, next_logit(model, y))
    mu = model.error.mean
    for k in range(h_max):
        logpe, lfact = tables(max(int(cur.max()), actuals[k]))
        if k == 0:
            ll, _, _ = _kernels.predictive(actuals[0], int(y[-1]), float(lam[0]), logpe, lfact)
            logp[0] = ll
            means[0] = float(logistic(lam[0])) * y[-1] + mu
        else:
            p = _kernels.mixture_at(actuals[k], cur, lam, logpe, lfact)
            logp[k] = math.log(p) if p > 0 else -math.inf
            means[k] = float(np.mean(logistic(lam) * cur)) + mu
        if k == h_max - 1:
            break
        y_new = rng.binomial(cur, logistic(lam)) + np.asarray(sample(model.error, rng, size=B), dtype=np.int64)
        lam = _update_logit(model, y_new, cur, lam, tables)
        cur = y_new
    return means, logp
