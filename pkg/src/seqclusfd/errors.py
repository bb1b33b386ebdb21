"""Exception hierarchy.

Every error carries a CLI exit code so the front-end can map failures
without inspecting messages.
"""


class SeqClusError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ParameterError(SeqClusError, ValueError):
    """An argument is outside its legal range."""

    exit_code = 2


class DataError(SeqClusError, ValueError):
    """Input data are malformed or violate a data-quality rule."""

    exit_code = 3


class ParseError(DataError):
    """A curve or label file could not be parsed."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class ShapeError(DataError):
    """Array lengths or curve counts do not match."""


class MappingError(DataError):
    """A label mapping does not cover every label it is applied to."""


class DegenerateInputError(DataError):
    """Fewer distinct values than requested clusters."""

    def __init__(self, message, distinct_count):
        super().__init__(message)
        self.distinct_count = distinct_count


class NumericError(SeqClusError, ArithmeticError):
    """A numerical procedure failed."""

    exit_code = 4


class FitError(NumericError):
    """A spline fit could not be computed."""


class ExtrapolationError(NumericError):
    """Evaluation requested outside the fitted domain."""


class SizeError(DataError):
    """Too few curves for the requested construction."""
