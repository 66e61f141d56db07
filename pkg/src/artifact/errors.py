"""Exception hierarchy shared by all modules.

Validation-type errors map to CLI exit code 1, numerical failures to exit
code 2 (see :mod:`artifact.cli`).
"""

from __future__ import annotations


class ArtifactError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(ArtifactError, ValueError):
    """Invalid input or configuration (CLI exit code 1)."""


class DomainError(ValidationError):
    """Argument outside the mathematical domain of an operation."""


class ConfigurationError(ValidationError):
    """Inconsistent or unsupported configuration."""


class UnsupportedCombinationError(ValidationError):
    """Requested option combination is not implemented (e.g. backend B with g != h)."""


class NumericalError(ArtifactError, ArithmeticError):
    """Numerical failure (CLI exit code 2)."""


class BlowUpError(NumericalError):
    """Non-finite values appeared during time integration."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class DivergenceError(NumericalError):
    """A series or iteration that should converge does not."""


class QuadratureError(NumericalError):
    """A quadrature failed its self-convergence check."""


class CalibrationError(NumericalError):
    """The Landau-constant fit is unstable."""


class SignalUnderflowError(NumericalError):
    """A measured error is indistinguishable from round-off."""
