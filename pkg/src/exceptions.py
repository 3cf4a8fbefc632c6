"""Exception hierarchy for the covariance estimation library."""

from typing import Optional


class FactorCovError(Exception):
    """Base class for all library errors."""


class ShapeError(FactorCovError, ValueError):
    """Raised when matrix dimensions are inconsistent."""


class DomainError(FactorCovError, ValueError):
    """Raised when an argument is outside the domain of an operation."""


class InsufficientDataError(FactorCovError, ValueError):
    """Raised when there are too few observations for an estimate."""


class ConfigurationError(FactorCovError, ValueError):
    """Raised for malformed configuration files or values."""


class CalibrationError(FactorCovError, ValueError):
    """Raised when calibration constants are mutually inconsistent."""


class RankDeficiencyError(FactorCovError, ValueError):
    """Raised when a Gram matrix cannot be inverted."""

    def __init__(self, message: str, dimension: Optional[int] = None, equation: Optional[int] = None):
        super().__init__(message)
        self.dimension = dimension
        self.equation = equation


class SingularMatrixError(FactorCovError, ValueError):
    """Raised when a matrix expected to be positive definite is not."""

    def __init__(self, message: str, min_eigenvalue: float):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class NumericalFailureError(FactorCovError, RuntimeError):
    """Raised when a LAPACK routine fails to converge."""


class GenerationError(FactorCovError, RuntimeError):
    """Raised when a rejection loop runs out of attempts."""

    def __init__(self, message: str, attempts: int):
        super().__init__(message)
        self.attempts = attempts
