"""Simulation of INAR-type series and of the sine/step survival-probability DGPs."""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass

import numpy as np

from gasinar import _kernels
from gasinar.distributions import ErrorSpec, NegativeBinomial, Poisson, log_pmf_table, sample
from gasinar.filter import default_init
from gasinar.models import GasInar, ModelSpec, RcInar, StaticInar
from gasinar.score import log_factorials, logistic

__all__ = [
    "DgpKind",
    "SimulatedSeries",
    "BURN_IN",
    "DGP_ERROR",
    "thin",
    "dgp_alpha",
    "simulate",
]

BURN_IN = 200
DGP_ERROR = Poisson(5.0)


class DgpKind(str, enum.Enum):
    FAST_SINE = "fast-sine"
    SLOW_SINE = "slow-sine"
    FAST_STEPS = "fast-steps"
    SLOW_STEPS = "slow-steps"

    @property
    def period(self) -> float:
        return 100.0 if self in (DgpKind.FAST_SINE, DgpKind.FAST_STEPS) else 250.0

    @property
    def is_step(self) -> bool:
        return self in (DgpKind.FAST_STEPS, DgpKind.SLOW_STEPS)


@dataclass
class SimulatedSeries:
    """A simulated series with the survival probability that generated each ``y[t]``.

    ``true_alpha[0]`` belongs to the (discarded) step that produced ``y[0]``;
    for GAS series ``true_logit`` holds the same path on the logit scale.
    """

    series: np.ndarray
    true_alpha: np.ndarray | None
    seed: int | None = None
    true_logit: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.true_alpha is not None and self.true_alpha.shape != self.series.shape:
            raise ValueError("true_alpha and series lengths differ")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "y", "true_alpha"])
        for t, y in enumerate(self.series):
            a = "" if self.true_alpha is None else repr(float(self.true_alpha[t]))
            w.writerow([t, int(y), a])
        return buf.getvalue()


def thin(n: int, alpha: float, rng: np.random.Generator) -> int:
    """Binomial thinning: the number of survivors among ``n`` with probability ``alpha``."""
    if n == 0:
        return 0
    return int(rng.binomial(n, alpha))


def _dgp_alpha_array(kind: DgpKind, t: np.ndarray) -> np.ndarray:
    s = np.sin(np.pi * np.asarray(t, dtype=float) / kind.period)
    if kind.is_step:
        return np.where(s > 0.0, 0.75, 0.25)
    return 0.5 + 0.25 * s


def dgp_alpha(kind: DgpKind | str, t: int) -> float:
    """The deterministic survival probability of ``kind`` at time ``t >= 1``."""
    kind = DgpKind(kind)
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    return float(_dgp_alpha_array(kind, np.array([t]))[0])


def _initial_count(error: ErrorSpec, mean_alpha: float, rng: np.random.Generator) -> int:
    mean = error.mean / (1.0 - mean_alpha)
    if isinstance(error, NegativeBinomial):
        start = NegativeBinomial(mean, mean * error.variance / error.mean)
    else:
        start = Poisson(mean)
    return int(sample(start, rng))


def _simulate_path(alpha_at, error: ErrorSpec, n: int, mean_alpha: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Generic recursion where ``alpha_at(i, y_prev)`` gives the survival probability."""
    total = n + BURN_IN
    eps = np.asarray(sample(error, rng, size=total), dtype=np.int64)
    y = np.empty(total, dtype=np.int64)
    alpha = np.empty(total)
    prev = _initial_count(error, mean_alpha, rng)
    for i in range(total):
        a = alpha_at(i, prev)
        alpha[i] = a
        prev = thin(prev, a, rng) + int(eps[i])
        y[i] = prev
    return y[BURN_IN:], alpha[BURN_IN:]


def _simulate_gas(model: GasInar, n: int, rng) -> SimulatedSeries:
    p = model.params
    total = n + BURN_IN
    eps = np.asarray(sample(p.error, rng, size=total), dtype=np.int64)
    y = np.empty(total, dtype=np.int64)
    lam = np.empty(total)
    cur = _kernels.clip_logit(default_init(p))
    prev = _initial_count(p.error, float(logistic(cur)), rng)
    lfact = log_factorials(64)
    logpe = log_pmf_table(p.error, 64)
    for i in range(total):
        lam[i] = cur
        a = float(logistic(cur))
        yi = thin(prev, a, rng) + int(eps[i])
        if yi >= lfact.size or prev >= lfact.size:
            size = 2 * max(yi, prev) + 1
            lfact = log_factorials(size)
            logpe = log_pmf_table(p.error, size)
        _, s, _ = _kernels.predictive(yi, prev, cur, logpe, lfact)
        cur = _kernels.clip_logit(p.omega + p.beta * cur + p.tau * s)
        y[i] = yi
        prev = yi
    lam = lam[BURN_IN:]
    return SimulatedSeries(y[BURN_IN:], logistic(lam), true_logit=lam)


def simulate(model_or_dgp: ModelSpec | DgpKind | str, T: int, rng: np.random.Generator | int) -> SimulatedSeries:
    """Simulate ``T`` observations after a discarded burn-in of ``BURN_IN`` steps.

    The first count of the burn-in is drawn from the error family with mean
    ``mu / (1 - mean alpha)``. For DGPs the time index of ``y[i]`` is ``i + 1``.
    """
    if T < 2:
        raise ValueError(f"T must be >= 2, got {T}")
    seed = None
    if not isinstance(rng, np.random.Generator):
        seed = int(rng)
        rng = np.random.default_rng(seed)
    m = model_or_dgp
    if isinstance(m, GasInar):
        out = _simulate_gas(m, T, rng)
        out.seed = seed
        return out
    if isinstance(m, StaticInar):
        y, a = _simulate_path(lambda i, yp: m.alpha, m.error, T, m.alpha, rng)
    elif isinstance(m, RcInar):
        mean_alpha = float(logistic(m.omega + m.tau * m.error.mean))
        y, a = _simulate_path(
            lambda i, yp: float(logistic(np.clip(m.omega + m.tau * yp, -35.0, 35.0))),
            m.error, T, mean_alpha, rng,
        )
    else:
        kind = DgpKind(m)
        alphas = _dgp_alpha_array(kind, np.arange(-BURN_IN + 1, T + 1))
        y, a = _simulate_path(lambda i, yp: float(alphas[i]), DGP_ERROR, T, 0.5, rng)
    return SimulatedSeries(y, a, seed)
