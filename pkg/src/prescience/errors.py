"""Exception types shared across the package."""


class PrescienceError(Exception):
    """Base class for all package errors."""


class SchemaError(PrescienceError):
    """A column named in the schema is missing or duplicated."""


class ParseError(PrescienceError):
    """A cell could not be parsed; carries the offending location."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class DegenerateColumnError(PrescienceError):
    def __init__(self, column):
        super().__init__(f"column {column!r} has zero sample variance")
        self.column = column


class NumericFailure(PrescienceError):
    """The simplex engine could not make numerically safe progress."""

    def __init__(self, message, iterations):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


class DecompositionError(PrescienceError):
    """Cholesky factorisation hit a non-positive pivot."""


class SizeError(PrescienceError):
    """Input exceeds the guard rails of the exhaustive oracle."""


class ContractError(PrescienceError):
    """An operation was called outside its documented precondition."""
