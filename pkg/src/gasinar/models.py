"""GAS-INAR, static INAR and rc-INAR behind one conditional-model interface.

Each model is fully described for downstream code by the logit survival
probability it assigns to every period plus its error distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from gasinar import _kernels
from gasinar.distributions import ErrorSpec, NegativeBinomial, Poisson, error_from_dict, log_pmf_table
from gasinar.exceptions import ParameterDomainError
from gasinar.filter import GasParams, as_counts, run_filter
from gasinar.score import log_factorials, logistic

__all__ = [
    "GasInar",
    "StaticInar",
    "RcInar",
    "ModelSpec",
    "MODEL_KINDS",
    "kind_of",
    "logit_path",
    "alpha_path",
    "next_logit",
    "log_likelihood",
    "loglik_sum",
    "loglik_contributions",
    "model_to_dict",
    "model_from_dict",
]

MODEL_KINDS = (
    "gas-poisson",
    "gas-negbin",
    "inar-poisson",
    "inar-negbin",
    "rc-poisson",
    "rc-negbin",
)


@dataclass(frozen=True)
class GasInar:
    params: GasParams

    @property
    def error(self) -> ErrorSpec:
        return self.params.error


@dataclass(frozen=True)
class StaticInar:
    """INAR(1) with constant survival probability.

    ``alpha = 0`` is accepted (i.i.d. counts) for simulation; likelihood
    evaluation clamps the logit at -35.
    """

    alpha: float
    error: ErrorSpec

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha < 1.0:
            raise ParameterDomainError(f"static alpha must lie in [0, 1), got {self.alpha}")


@dataclass(frozen=True)
class RcInar:
    """Survival probability ``logistic(omega + tau * y_prev)``."""

    omega: float
    tau: float
    error: ErrorSpec

    def __post_init__(self) -> None:
        if not (math.isfinite(self.omega) and math.isfinite(self.tau)):
            raise ParameterDomainError("omega and tau must be finite")


ModelSpec = Union[GasInar, StaticInar, RcInar]


def kind_of(model: ModelSpec) -> str:
    family = model.error.family
    prefix = {GasInar: "gas", StaticInar: "inar", RcInar: "rc"}[type(model)]
    return f"{prefix}-{family}"


def _clipped_logit(p: float) -> float:
    if p <= 0.0:
        return -_kernels.LOGIT_BOUND
    return float(np.clip(math.log(p) - math.log1p(-p), -_kernels.LOGIT_BOUND, _kernels.LOGIT_BOUND))


def logit_path(model: ModelSpec, series) -> np.ndarray:
    """Logit survival probability for each of ``y[1:]``."""
    y = as_counts(series)
    if isinstance(model, GasInar):
        return run_filter(y, model.params).lam
    if isinstance(model, StaticInar):
        return np.full(y.size - 1, _clipped_logit(model.alpha))
    if isinstance(model, RcInar):
        return np.clip(model.omega + model.tau * y[:-1], -_kernels.LOGIT_BOUND, _kernels.LOGIT_BOUND)
    raise TypeError(f"unsupported model {model!r}")


def alpha_path(model: ModelSpec, series) -> np.ndarray:
    if isinstance(model, StaticInar):
        return np.full(as_counts(series).size - 1, float(model.alpha))
    return logistic(logit_path(model, series))


def next_logit(model: ModelSpec, series) -> float:
    """Logit survival probability for the period after the last observation."""
    y = as_counts(series)
    if isinstance(model, GasInar):
        return run_filter(y, model.params).lambda_next
    if isinstance(model, StaticInar):
        return _clipped_logit(model.alpha)
    return float(np.clip(model.omega + model.tau * y[-1], -_kernels.LOGIT_BOUND, _kernels.LOGIT_BOUND))


def loglik_contributions(model: ModelSpec, series) -> np.ndarray:
    y = as_counts(series)
    if isinstance(model, GasInar):
        return run_filter(y, model.params).loglik_contrib
    ymax = int(y.max())
    out = np.empty(y.size - 1)
    _kernels.path_loglik(
        y, logit_path(model, y), log_pmf_table(model.error, ymax), log_factorials(ymax), out
    )
    return out


def loglik_sum(model: ModelSpec, series) -> float:
    """Summed log-likelihood over ``y[1:]``, the quantity AIC and LR tests use."""
    return float(loglik_contributions(model, series).sum())


def log_likelihood(model: ModelSpec, series) -> float:
    """Average log-likelihood ``(1/T) sum_t log p(y_t | alpha_t, y_{t-1})``."""
    contrib = loglik_contributions(model, series)
    return float(contrib.sum() / contrib.size)


def model_to_dict(model: ModelSpec) -> dict:
    doc: dict = {"kind": kind_of(model)}
    if isinstance(model, GasInar):
        p = model.params
        doc["params"] = {"omega": p.omega, "beta": p.beta, "tau": p.tau}
    elif isinstance(model, StaticInar):
        doc["params"] = {"alpha": model.alpha}
    else:
        doc["params"] = {"omega": model.omega, "tau": model.tau}
    doc["params"] = {k: float(v) for k, v in doc["params"].items()}
    doc["error"] = model.error.to_dict()
    return doc


def model_from_dict(doc: dict) -> ModelSpec:
    kind = doc["kind"]
    prefix, _, family = kind.partition("-")
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    error = error_from_dict(doc["error"])
    if error.family != family:
        raise ValueError(f"kind {kind!r} does not match error family {error.family!r}")
    p = doc["params"]
    if prefix == "gas":
        return GasInar(GasParams(float(p["omega"]), float(p["beta"]), float(p["tau"]), error))
    if prefix == "inar":
        return StaticInar(float(p["alpha"]), error)
    return RcInar(float(p["omega"]), float(p["tau"]), error)


def make_error(family: str, mean: float, variance: float | None = None) -> ErrorSpec:
    if family == "poisson":
        return Poisson(mean)
    if family == "negbin":
        return NegativeBinomial(mean, variance)
    raise ValueError(f"unknown error family {family!r}")
