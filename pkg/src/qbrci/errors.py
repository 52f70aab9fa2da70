"""Exception hierarchy shared by all modules."""

from __future__ import annotations

__all__ = [
    "QbrciError",
    "DomainError",
    "UnsupportedOrderError",
    "AccuracyError",
    "SingularInformationError",
    "DegenerateInformationError",
    "ConvergenceError",
    "BoundaryError",
    "NestedConvergenceError",
    "NoRootError",
    "PredictorRangeError",
    "IncompleteConstantsError",
    "ConfigError",
    "FormulaError",
    "DatasetError",
]


class QbrciError(Exception):
    """Base class for every error raised by this package."""


class DomainError(QbrciError, ValueError):
    """An argument lies outside the domain of a function or model."""


class UnsupportedOrderError(QbrciError, ValueError):
    pass


class AccuracyError(QbrciError, ArithmeticError):
    """Quadrature did not reach the requested tolerance.

    The best available estimate and its error bound are kept on the
    exception so callers can decide whether to accept them.
    """

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (estimate={estimate!r}, error={error!r})")
        self.estimate = estimate
        self.error = error


class SingularInformationError(QbrciError, ArithmeticError):
    pass


class DegenerateInformationError(QbrciError, ArithmeticError):
    """Variance of the (profile) score is not strictly positive."""


class ConvergenceError(QbrciError, RuntimeError):
    def __init__(self, message: str, trace: list | None = None):
        super().__init__(message)
        self.trace = trace or []


class BoundaryError(ConvergenceError):
    """Iterates ran off to the edge of the parameter space."""

    def __init__(self, message: str, direction: int, trace: list | None = None):
        super().__init__(message, trace)
        self.direction = direction


class NestedConvergenceError(ConvergenceError):
    """The constrained nuisance fit failed at a given value of the interest parameter."""

    def __init__(self, message: str, psi: float, trace: list | None = None):
        super().__init__(message, trace)
        self.psi = psi


class NoRootError(QbrciError, RuntimeError):
    """No sign change of the modified score was found in the scanned range."""

    def __init__(self, message: str, direction: int, last_point: float):
        super().__init__(message)
        self.direction = direction
        self.last_point = last_point


class PredictorRangeError(DomainError):
    def __init__(self, message: str, observation: int):
        super().__init__(message)
        self.observation = observation


class IncompleteConstantsError(QbrciError, KeyError):
    pass


class ConfigError(QbrciError, ValueError):
    pass


class FormulaError(QbrciError, ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class DatasetError(QbrciError, ValueError):
    """Malformed CSV input: ragged rows, missing or non-numeric values."""
