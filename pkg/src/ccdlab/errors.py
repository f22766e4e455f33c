"""Exception hierarchy of the toolkit.

Every error raised on purpose derives from CcdLabError. The controller maps
InvalidConfigError (and subclasses) to the config-error exit code and every
other CcdLabError to the numeric-failure exit code.
"""
from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from .schemas import FitResult


class CcdLabError(Exception):
    """Base class for all toolkit errors."""


class InvalidConfigError(CcdLabError, ValueError):
    """Physically invalid configuration or argument."""


class ConfigSchemaError(InvalidConfigError):
    """A run-config file violates the schema; message carries the location."""


class UnsupportedSpectrumError(CcdLabError, ValueError):
    """A spectral function was evaluated where it diverges (static member at ν = 0)."""


class UnsupportedRegimeError(CcdLabError, ValueError):
    """The requested operation has no prescription for these parameters."""


class OutOfValidityError(CcdLabError, ValueError):
    """Parameters lie outside the range where a closed form is defined."""


class InconsistentInputError(CcdLabError, ValueError):
    """Measured inputs contradict the model they are inverted through."""


class NumericError(CcdLabError, ArithmeticError):
    """Non-finite values or a loss of unitarity during a computation."""


class FitFailureError(CcdLabError, RuntimeError):
    """A nonlinear fit did not converge; ``result`` holds the best-so-far fit."""

    def __init__(self, message: str, result: Optional["FitResult"] = None):
        super().__init__(message)
        self.result = result
