"""Exception hierarchy shared by every qheat module."""

from __future__ import annotations


class QHeatError(Exception):
    """Base class for all library errors."""


class DomainError(QHeatError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(QHeatError, ValueError):
    """A run configuration is malformed or incomplete."""


class NumericalError(QHeatError, ArithmeticError):
    """A numerical procedure failed to reach its tolerance.

    Parameters
    ----------
    message : str
        Human readable diagnostic.
    estimate : float, optional
        The error estimate achieved before giving up.
    """

    def __init__(self, message: str, estimate: float | None = None):
        super().__init__(message)
        self.estimate = estimate


class QuadratureError(NumericalError):
    pass


class SolverError(NumericalError):
    pass


class SingularCoefficientError(NumericalError):
    """Master-equation coefficients are undefined where u(t) vanishes."""

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class TruncationError(NumericalError):
    pass
