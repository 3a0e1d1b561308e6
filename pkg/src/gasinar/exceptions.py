class GasInarError(Exception):
    """Base class for errors raised by gasinar."""


class ParameterDomainError(GasInarError, ValueError):
    """A parameter lies outside its admissible domain."""


class InputError(GasInarError, ValueError):
    """Invalid observed data (negative, fractional, or malformed counts)."""


class NoSurvivalInformationError(GasInarError):
    """The series carries no information on the survival probability."""


class NotNestedError(GasInarError, ValueError):
    """Two fitted models are not nested, so a likelihood-ratio test is undefined."""


class CovarianceUnavailableError(GasInarError):
    """The estimator covariance is not available (Hessian not positive definite)."""
