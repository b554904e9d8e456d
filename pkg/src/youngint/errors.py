"""Exception and warning types shared across the package."""

from __future__ import annotations


class YoungError(Exception):
    """Base class for all package errors."""


class DomainError(YoungError, ValueError):
    """An argument lies outside the domain of the operation."""


class PreconditionError(YoungError, ValueError):
    """A mathematical precondition of the operation is not met.

    Extra diagnostic values are kept in ``details``.
    """

    def __init__(self, message: str, **details: float) -> None:
        super().__init__(message)
        self.details = details


class NumericalError(YoungError, ArithmeticError):
    """A numerical routine failed (e.g. a covariance is not positive definite)."""


class DivergenceError(NumericalError):
    """A non-finite state was produced, or an iteration diverged."""

    def __init__(self, message: str, index: int | None = None) -> None:
        super().__init__(message)
        self.index = index


class CalibrationError(YoungError):
    """The empirical constant could not be calibrated from a sweep."""


class ExperimentError(YoungError):
    """An experiment could not be completed within its failure budget."""


class YoungWarning(UserWarning):
    """Heuristic precondition or convergence warning."""
