"""Exception hierarchy.

Two families matter to callers: :class:`UsageError` (bad arguments or
configuration, CLI exit status 2) and :class:`NumericalError` (the numbers
went wrong at run time, CLI exit status 3).
"""

from __future__ import annotations


class MindexError(Exception):
    """Base class for all package errors."""


class UsageError(MindexError, ValueError):
    """Invalid arguments, shapes or configuration."""


class SchemaError(UsageError):
    """Input file does not match the declared schema."""


class ParseError(UsageError):
    """A cell in an input file could not be parsed."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class NumericalError(MindexError, ArithmeticError):
    """Base class for run-time numerical failures."""


class DegenerateDataError(NumericalError):
    """Data with zero spread where a scale is required."""


class DivergenceError(NumericalError):
    """An iterate became non-finite or exploded."""

    def __init__(self, k: int, norm: float):
        super().__init__(f"iteration diverged at k={k} (|beta|={norm:.6g})")
        self.k = k
        self.norm = norm


class InitializationError(NumericalError):
    """The logit starting value could not be computed."""


class NormalizationError(InitializationError):
    """The covariate used for normalization has a non-positive coefficient."""


class InferenceError(NumericalError):
    """The plug-in covariance cannot be formed (singular slope matrix)."""
