"""Filter stability checks, filter-quality metrics, confidence bands and
rolling-origin forecast evaluation."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from gasinar import _kernels
from gasinar.distributions import ErrorSpec, log_pmf_table, support_size
from gasinar.estimation import FitOptions, FitResult, fit, from_unconstrained
from gasinar.exceptions import CovarianceUnavailableError, GasInarError
from gasinar.filter import GasParams, as_counts
from gasinar.forecasting import ForecastDistribution, forecast_scores
from gasinar.models import ModelSpec, alpha_path, logit_path
from gasinar.score import log_factorials
from gasinar.simulation import DGP_ERROR, DgpKind, SimulatedSeries

__all__ = [
    "ContractionReport",
    "contraction_check",
    "kl_conditional",
    "score_zero_mean_error",
    "KnownPath",
    "filter_quality",
    "Bands",
    "alpha_confidence_bands",
    "EvalReport",
    "score_forecast",
    "rolling_evaluate",
]

logger = logging.getLogger(__name__)

MIN_GRID = 101


# --------------------------------------------------------------------------
# contraction


@dataclass(frozen=True)
class ContractionReport:
    """Sample averages of the log contraction coefficient of the filter.

    ``sufficient_value`` uses the closed-form score-derivative bounds;
    ``empirical_value`` takes the sup over a logit-alpha grid. Either is
    ``-inf`` when ``beta = tau = 0``.
    """

    sufficient_value: float
    empirical_value: float
    grid_size: int

    @property
    def satisfied_sufficient(self) -> bool:
        return self.sufficient_value < 0

    @property
    def satisfied_empirical(self) -> bool:
        return self.empirical_value < 0

    def to_dict(self) -> dict:
        return {
            "sufficient_value": _finite_or_str(self.sufficient_value),
            "empirical_value": _finite_or_str(self.empirical_value),
            "satisfied_sufficient": self.satisfied_sufficient,
            "satisfied_empirical": self.satisfied_empirical,
            "grid_size": self.grid_size,
        }


def _finite_or_str(x: float):
    return x if math.isfinite(x) else str(x)


def contraction_check(series, params: GasParams, grid_size: int = 1001) -> ContractionReport:
    y = as_counts(series)
    if grid_size < MIN_GRID:
        raise ValueError(f"grid_size must be >= {MIN_GRID}, got {grid_size}")
    grid = np.linspace(-_kernels.LOGIT_BOUND, _kernels.LOGIT_BOUND, grid_size)
    ymax = int(y.max())
    suff = np.empty(y.size - 1)
    emp = np.empty(y.size - 1)
    with np.errstate(divide="ignore"):
        _kernels.contraction_terms(
            y, float(params.beta), float(params.tau), grid,
            log_pmf_table(params.error, ymax), log_factorials(ymax), suff, emp,
        )
    return ContractionReport(float(suff.mean()), float(emp.mean()), grid_size)


# --------------------------------------------------------------------------
# divergences


def kl_conditional(p_true, p_model) -> float:
    """``sum_x p_true(x) log(p_true(x) / p_model(x))`` on a shared truncated support."""
    p = np.asarray(p_true, dtype=float)
    q = np.asarray(p_model, dtype=float)
    n = max(p.size, q.size)
    p = np.pad(p, (0, n - p.size))
    q = np.pad(q, (0, n - q.size))
    mask = p > 0
    if np.any(q[mask] <= 0):
        raise ValueError("p_model must be positive wherever p_true is positive")
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def score_zero_mean_error(y_prev: int, alpha: float, spec: ErrorSpec) -> float:
    """``sum_y p(y | y_prev, alpha) s(y)`` over the truncated support; should be 0."""
    lam = math.log(alpha) - math.log1p(-alpha)
    size = support_size(spec, shift=y_prev)
    logpe = log_pmf_table(spec, size)
    lfact = log_factorials(max(size, y_prev))
    total = 0.0
    for y in range(size):
        ll, s, _ = _kernels.predictive(y, y_prev, lam, logpe, lfact)
        total += math.exp(ll) * s
    return total


@dataclass(frozen=True)
class KnownPath:
    """A model given directly by its survival-probability path.

    ``alpha`` is aligned with the series (as ``SimulatedSeries.true_alpha``).
    """

    alpha: np.ndarray
    error: ErrorSpec


def _logit(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore"):
        return np.clip(np.log(a) - np.log1p(-a), -_kernels.LOGIT_BOUND, _kernels.LOGIT_BOUND)


def filter_quality(dgp: DgpKind | str, fitted: ModelSpec | KnownPath, sim: SimulatedSeries) -> dict:
    """Time-averaged squared alpha error and KL divergence against a DGP."""
    DgpKind(dgp)
    y = as_counts(sim.series)
    if sim.true_alpha is None or sim.true_alpha.size != y.size:
        raise ValueError("simulated series must carry a true alpha path of matching length")
    true_alpha = sim.true_alpha[1:]
    if isinstance(fitted, KnownPath):
        if fitted.alpha.size != y.size:
            raise ValueError("known path length does not match the series")
        a_hat = np.asarray(fitted.alpha[1:], dtype=float)
        lam_model = _logit(a_hat)
    else:
        lam_model = logit_path(fitted, y)
        a_hat = alpha_path(fitted, y)
    mse = float(np.mean((a_hat - true_alpha) ** 2))
    sizes = np.array(
        [max(support_size(DGP_ERROR, shift=int(v)), support_size(fitted.error, shift=int(v))) for v in y[:-1]],
        dtype=np.int64,
    )
    top = int(max(sizes.max(), y.max()))
    kl = np.empty(y.size - 1)
    _kernels.kl_path(
        y, _logit(true_alpha), lam_model,
        log_pmf_table(DGP_ERROR, top), log_pmf_table(fitted.error, top), log_factorials(top),
        sizes, kl,
    )
    return {"mse_alpha": mse, "mean_kl": float(kl.mean())}


# --------------------------------------------------------------------------
# confidence bands


@dataclass
class Bands:
    """Pointwise quantile bands of the filtered survival probability (approximate)."""

    alpha_hat: np.ndarray
    levels: tuple[float, ...]
    lower: dict
    upper: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["t", "alpha_hat"]
        for lv in self.levels:
            tag = f"{round(100 * lv):d}"
            header += [f"lo{tag}", f"hi{tag}"]
        w.writerow(header)
        for i in range(self.alpha_hat.size):
            row = [i + 1, repr(float(self.alpha_hat[i]))]
            for lv in self.levels:
                row += [repr(float(self.lower[lv][i])), repr(float(self.upper[lv][i]))]
            w.writerow(row)
        return buf.getvalue()


def alpha_confidence_bands(
    series,
    fit_result: FitResult,
    levels: Iterable[float] = (0.8, 0.95),
    n_draws: int = 1000,
    rng=0,
) -> Bands:
    """Bands from re-filtering under parameter draws from the estimator's normal approximation."""
    y = as_counts(series)
    if fit_result.covariance is None:
        raise CovarianceUnavailableError(
            "estimator covariance unavailable (Hessian not positive definite); "
            "use more data or more restarts"
        )
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(int(rng))
    levels = tuple(sorted(float(lv) for lv in levels))
    draws = rng.multivariate_normal(fit_result.theta, fit_result.covariance, size=n_draws)
    paths = np.empty((n_draws, y.size - 1))
    for i, v in enumerate(draws):
        paths[i] = alpha_path(from_unconstrained(fit_result.kind, v), y)
    lower, upper = {}, {}
    for lv in levels:
        q = (1.0 - lv) / 2.0
        lower[lv] = np.quantile(paths, q, axis=0)
        upper[lv] = np.quantile(paths, 1.0 - q, axis=0)
    return Bands(alpha_path(fit_result.model, y), levels, lower, upper)


# --------------------------------------------------------------------------
# rolling evaluation


@dataclass
class EvalReport:
    kind: str
    horizons: list[int]
    mse: list[float]
    log_score: list[float]
    n_origins: int
    skipped: int = 0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "horizons": self.horizons,
            "mse": self.mse,
            "log_score": self.log_score,
            "n_origins": self.n_origins,
            "skipped": self.skipped,
        }


def score_forecast(dist: ForecastDistribution, realized: int) -> tuple[float, float]:
    """Squared point-forecast error and log score of one forecast."""
    return (dist.point_mean - realized) ** 2, dist.log_prob(realized)


def rolling_evaluate(
    series,
    split: int,
    h_max: int,
    kinds: Sequence[str],
    B: int = 2000,
    rng: int = 0,
    options: FitOptions | None = None,
    refit_every: int = 1,
) -> dict[str, EvalReport]:
    """Expanding-window evaluation of h = 1..h_max forecasts.

    At each origin ``o`` (training data ``y[:o]``, ``o = split..len - h_max``)
    every model is refitted from scratch, with the previous origin's optimum
    added to the multistart pool. With ``refit_every = k > 1`` the models are
    refitted only at every k-th origin and in between are updated by
    filtering the expanded data at the latest estimate. Origins whose fit
    fails are skipped and counted.
    """
    y = as_counts(series)
    if split < 30:
        raise ValueError(f"split must be >= 30, got {split}")
    if h_max < 1 or split + h_max > y.size:
        raise ValueError("need split + h_max <= series length and h_max >= 1")
    if refit_every < 1:
        raise ValueError(f"refit_every must be >= 1, got {refit_every}")
    base = options or FitOptions(compute_se=False)
    if base.compute_se:
        base = replace(base, compute_se=False)
    origins = range(split, y.size - h_max + 1)
    reports = {}
    for kind in kinds:
        sq = np.zeros(h_max)
        ls = np.zeros(h_max)
        used = skipped = 0
        prev = None
        model = None
        for i, o in enumerate(origins):
            train = y[:o]
            if model is None or i % refit_every == 0:
                try:
                    res = fit(kind, train, base, extra_starts=[] if prev is None else [prev])
                except (GasInarError, ValueError, FloatingPointError) as exc:
                    logger.warning("origin %d skipped for %s: %s", o, kind, exc)
                    skipped += 1
                    continue
                prev = res.theta
                model = res.model
            means, logp = forecast_scores(model, train, y[o : o + h_max], B=B, rng=[rng, o])
            sq += (means - y[o : o + h_max]) ** 2
            ls += logp
            used += 1
        n = max(used, 1)
        reports[kind] = EvalReport(
            kind=kind,
            horizons=list(range(1, h_max + 1)),
            mse=(sq / n).tolist(),
            log_score=(ls / n).tolist(),
            n_origins=used,
            skipped=skipped,
        )
    return reports
