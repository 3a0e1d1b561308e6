"""Error-term distributions for INAR models.

Two families are supported, both with full support on the non-negative
integers: Poisson(mean) and a negative binomial parametrized by its mean and
variance. All evaluation happens in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import stats
from scipy.special import gammaln

from gasinar.exceptions import ParameterDomainError

__all__ = [
    "Poisson",
    "NegativeBinomial",
    "ErrorSpec",
    "negbin_size_prob",
    "log_pmf",
    "log_pmf_table",
    "pmf",
    "sample",
    "support_size",
    "error_from_dict",
]

TAIL_MASS = 1e-12
MIN_TERMS = 50


@dataclass(frozen=True)
class Poisson:
    mean: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mean) and self.mean > 0):
            raise ParameterDomainError(f"Poisson mean must be positive, got {self.mean}")

    @property
    def variance(self) -> float:
        return self.mean

    @property
    def family(self) -> str:
        return "poisson"

    def to_dict(self) -> dict:
        return {"family": "poisson", "mean": float(self.mean)}


@dataclass(frozen=True)
class NegativeBinomial:
    """Negative binomial error with mean ``mean`` and variance ``variance``.

    Strict overdispersion (``variance > mean``) is required; the equivalent
    size/probability pair is available through :attr:`size_prob`.
    """

    mean: float
    variance: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mean) and self.mean > 0):
            raise ParameterDomainError(f"negative binomial mean must be positive, got {self.mean}")
        if not (math.isfinite(self.variance) and self.variance > self.mean):
            raise ParameterDomainError(
                f"negative binomial variance must exceed the mean, got mean={self.mean}, "
                f"variance={self.variance}"
            )

    @property
    def size_prob(self) -> tuple[float, float]:
        return negbin_size_prob(self.mean, self.variance)

    @property
    def family(self) -> str:
        return "negbin"

    def to_dict(self) -> dict:
        return {"family": "negbin", "mean": float(self.mean), "variance": float(self.variance)}


ErrorSpec = Union[Poisson, NegativeBinomial]


def negbin_size_prob(mean: float, variance: float) -> tuple[float, float]:
    """Map (mean, variance) to the (size r, success probability p) pair.

    The pmf is ``Gamma(x + r) / (Gamma(r) x!) p**r (1 - p)**x`` so that
    ``r (1 - p) / p == mean`` and ``r (1 - p) / p**2 == variance``.
    """
    if not (mean > 0 and variance > mean):
        raise ParameterDomainError(
            f"need variance > mean > 0 for a negative binomial, got ({mean}, {variance})"
        )
    return mean * mean / (variance - mean), mean / variance


def _check(spec: ErrorSpec) -> None:
    if not isinstance(spec, (Poisson, NegativeBinomial)):
        raise TypeError(f"unsupported error specification {spec!r}")


def log_pmf_table(spec: ErrorSpec, xmax: int) -> np.ndarray:
    """Return ``log p_e(x)`` for ``x = 0..xmax`` as a float array."""
    _check(spec)
    x = np.arange(int(xmax) + 1, dtype=float)
    if isinstance(spec, Poisson):
        return x * math.log(spec.mean) - spec.mean - gammaln(x + 1.0)
    r, p = spec.size_prob
    return (
        gammaln(x + r)
        - gammaln(r)
        - gammaln(x + 1.0)
        + r * math.log(p)
        + x * math.log1p(-p)
    )


def log_pmf(spec: ErrorSpec, x: int) -> float:
    if x < 0 or int(x) != x:
        raise ParameterDomainError(f"counts must be non-negative integers, got {x}")
    x = int(x)
    _check(spec)
    if isinstance(spec, Poisson):
        return x * math.log(spec.mean) - spec.mean - math.lgamma(x + 1.0)
    r, p = spec.size_prob
    return (
        math.lgamma(x + r)
        - math.lgamma(r)
        - math.lgamma(x + 1.0)
        + r * math.log(p)
        + x * math.log1p(-p)
    )


def pmf(spec: ErrorSpec, x: int) -> float:
    return math.exp(log_pmf(spec, x))


def _frozen(spec: ErrorSpec):
    if isinstance(spec, Poisson):
        return stats.poisson(spec.mean)
    r, p = spec.size_prob
    return stats.nbinom(r, p)


def support_size(spec: ErrorSpec, shift: int = 0) -> int:
    """Number of terms used when summing over the support of ``shift + e``.

    Sums stop once the cumulative mass reaches ``1 - 1e-12`` and never use
    fewer than ``max(5 * mean, 50)`` terms, where ``mean`` includes the shift.
    """
    _check(spec)
    tail = int(_frozen(spec).isf(TAIL_MASS)) + 1
    mean = spec.mean + shift
    return int(max(shift + tail + 1, math.ceil(5 * mean), MIN_TERMS))


def sample(spec: ErrorSpec, rng: np.random.Generator, size=None):
    """Draw from the error distribution using ``rng``."""
    _check(spec)
    if isinstance(spec, Poisson):
        return rng.poisson(spec.mean, size=size)
    r, p = spec.size_prob
    return rng.negative_binomial(r, p, size=size)


def error_from_dict(doc: dict) -> ErrorSpec:
    family = doc.get("family")
    if family == "poisson":
        return Poisson(float(doc["mean"]))
    if family == "negbin":
        return NegativeBinomial(float(doc["mean"]), float(doc["variance"]))
    raise ValueError(f"unknown error family {family!r}")
