"""Score-driven filter for the logit survival probability."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from gasinar import _kernels
from gasinar.distributions import ErrorSpec, log_pmf_table
from gasinar.exceptions import InputError, ParameterDomainError
from gasinar.score import log_factorials, logistic

__all__ = ["GasParams", "FilterPath", "as_counts", "default_init", "run_filter"]


def as_counts(series, min_length: int = 2) -> np.ndarray:
    """Validate a count series and return it as an int64 array."""
    arr = np.asarray(series)
    if arr.ndim != 1:
        raise InputError("a count series must be one-dimensional")
    if arr.size < min_length:
        raise InputError(f"need at least {min_length} observations, got {arr.size}")
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise InputError("counts must be integers")
    elif arr.dtype.kind not in "iu":
        raise InputError(f"counts must be integers, got dtype {arr.dtype}")
    out = arr.astype(np.int64)
    if np.any(out < 0):
        raise InputError(f"counts must be non-negative (first bad index {int(np.argmax(out < 0))})")
    return out


@dataclass(frozen=True)
class GasParams:
    omega: float
    beta: float
    tau: float
    error: ErrorSpec

    def __post_init__(self) -> None:
        if not abs(self.beta) < 1.0:
            raise ParameterDomainError(f"|beta| must be < 1, got {self.beta}")
        if not (math.isfinite(self.omega) and math.isfinite(self.tau)):
            raise ParameterDomainError("omega and tau must be finite")

    @classmethod
    def from_mean_logit(cls, mean_logit: float, beta: float, tau: float, error: ErrorSpec) -> "GasParams":
        """Build from the unconditional mean of ``logit(alpha)`` instead of the intercept.

        The recursion becomes ``lam' = mean_logit (1 - beta) + beta lam + tau s``.
        """
        return cls(mean_logit * (1.0 - beta), beta, tau, error)

    @property
    def mean_logit(self) -> float:
        return self.omega / (1.0 - self.beta)


def default_init(params: GasParams) -> float:
    """Unconditional mean of the logit survival probability, ``omega / (1 - beta)``."""
    if not abs(params.beta) < 1.0:
        raise ParameterDomainError(f"|beta| must be < 1, got {params.beta}")
    return params.omega / (1.0 - params.beta)


@dataclass
class FilterPath:
    """Filtered quantities for t = 1..T (index ``t - 1`` in each array).

    ``lambda_next`` is the logit survival probability assigned to the period
    after the last observation, used for one-step forecasts.
    """

    y: np.ndarray
    lam: np.ndarray
    score: np.ndarray
    loglik_contrib: np.ndarray
    lambda_next: float
    saturations: int = 0
    alpha: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.alpha = logistic(self.lam)

    @property
    def alpha_next(self) -> float:
        return float(logistic(self.lambda_next))

    @property
    def loglik(self) -> float:
        return float(self.loglik_contrib.sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "y", "alpha", "score", "loglik_contrib"])
        for i in range(self.lam.size):
            w.writerow(
                [i + 1, int(self.y[i + 1]), repr(float(self.alpha[i])),
                 repr(float(self.score[i])), repr(float(self.loglik_contrib[i]))]
            )
        return buf.getvalue()


def _tables(y: np.ndarray, error: ErrorSpec) -> tuple[np.ndarray, np.ndarray]:
    ymax = int(y.max())
    return log_pmf_table(error, ymax), log_factorials(ymax)


def run_filter(series, params: GasParams, init: float | None = None) -> FilterPath:
    """Filter the survival probability through the series.

    ``init`` is the logit survival probability for the first likelihood
    contribution (the one for ``y[1]``); it defaults to :func:`default_init`.
    """
    y = as_counts(series)
    if init is None:
        init = default_init(params)
    n = y.size - 1
    lam = np.empty(n)
    sc = np.empty(n)
    ll = np.empty(n)
    logpe, lfact = _tables(y, params.error)
    lam_next, nsat = _kernels.gas_filter(
        y, float(params.omega), float(params.beta), float(params.tau), float(init),
        logpe, lfact, lam, sc, ll,
    )
    return FilterPath(y, lam, sc, ll, float(lam_next), int(nsat))
