"""Predictive pmf of an INAR observation and its logit-alpha derivatives.

The conditional pmf of ``y`` given ``y_prev`` is the convolution of a
Binomial(y_prev, alpha) survivor count with the error pmf. Its score with
respect to ``logit(alpha)`` is a weighted mean of ``k - y_prev * alpha`` and
the score derivative reduces to a weighted variance of ``k`` minus
``alpha (1 - alpha) y_prev``, under weights
``p_k = C(y_prev, k) alpha^k (1 - alpha)^(y_prev - k) p_e(y - k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from gasinar import _kernels
from gasinar.distributions import ErrorSpec, log_pmf_table, support_size
from gasinar.exceptions import ParameterDomainError

__all__ = [
    "ScoreEvaluation",
    "evaluate",
    "evaluate_logit",
    "predictive_pmf",
    "predictive_log_pmf",
    "score",
    "score_derivative",
    "log_factorials",
    "logit",
    "logistic",
]


@dataclass(frozen=True)
class ScoreEvaluation:
    log_predictive: float
    score: float
    score_derivative: float
    m: int


def logit(p: float) -> float:
    return math.log(p) - math.log1p(-p)


def logistic(x):
    return 1.0 / (1.0 + np.exp(-x))


def log_factorials(nmax: int) -> np.ndarray:
    return gammaln(np.arange(int(nmax) + 1, dtype=float) + 1.0)


def _check_counts(y: int, y_prev: int) -> tuple[int, int]:
    if y < 0 or y_prev < 0 or int(y) != y or int(y_prev) != y_prev:
        raise ParameterDomainError(f"counts must be non-negative integers, got ({y}, {y_prev})")
    return int(y), int(y_prev)


def _lam(alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise ParameterDomainError(f"alpha must lie strictly inside (0, 1), got {alpha}")
    lam = logit(alpha)
    if abs(lam) > _kernels.LOGIT_BOUND:
        raise ParameterDomainError(f"logit(alpha)={lam:.3g} outside [-35, 35]")
    return lam


def evaluate_logit(y: int, y_prev: int, lam: float, spec: ErrorSpec) -> ScoreEvaluation:
    """Evaluate the kernel at ``logit(alpha) = lam``."""
    y, y_prev = _check_counts(y, y_prev)
    if not abs(lam) <= _kernels.LOGIT_BOUND:
        raise ParameterDomainError(f"logit(alpha)={lam} outside [-35, 35]")
    logpe = log_pmf_table(spec, y)
    lfact = log_factorials(max(y, y_prev))
    ll, s, sd = _kernels.predictive(y, y_prev, float(lam), logpe, lfact)
    return ScoreEvaluation(ll, s, sd, min(y, y_prev))


def evaluate(y: int, y_prev: int, alpha: float, spec: ErrorSpec) -> ScoreEvaluation:
    return evaluate_logit(y, y_prev, _lam(alpha), spec)


def predictive_log_pmf(y: int, y_prev: int, alpha: float, spec: ErrorSpec) -> float:
    """``log sum_k Binom(k; y_prev, alpha) p_e(y - k)`` over ``k <= min(y, y_prev)``."""
    return evaluate(y, y_prev, alpha, spec).log_predictive


def score(y: int, y_prev: int, alpha: float, spec: ErrorSpec) -> float:
    """Derivative of :func:`predictive_log_pmf` with respect to ``logit(alpha)``."""
    return evaluate(y, y_prev, alpha, spec).score


def score_derivative(y: int, y_prev: int, alpha: float, spec: ErrorSpec) -> float:
    """Derivative of :func:`score` with respect to ``logit(alpha)``."""
    return evaluate(y, y_prev, alpha, spec).score_derivative


def predictive_pmf(y_prev: int, alpha: float, spec: ErrorSpec, size: int | None = None) -> np.ndarray:
    """The full conditional pmf of ``y`` given ``y_prev`` on ``0..size-1``.

    ``size`` defaults to the truncation rule of :func:`~gasinar.distributions.support_size`.
    """
    _, y_prev = _check_counts(0, y_prev)
    lam = _lam(alpha)
    if size is None:
        size = support_size(spec, shift=y_prev)
    out = np.empty(int(size))
    _kernels.predictive_pmf_row(
        y_prev, lam, log_pmf_table(spec, size), log_factorials(max(size, y_prev)), out
    )
    return out
