"""Exception hierarchy shared by all validity_lab modules."""

from __future__ import annotations


class ValidityLabError(Exception):
    """Base class for every error raised by the toolkit."""


class ParseError(ValidityLabError, ValueError):
    """A tabular row or header could not be parsed."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ValidationError(ValidityLabError, ValueError):
    """A value parsed fine but violates a domain invariant."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class SchemaError(ValidityLabError, ValueError):
    """Feature names required by a predictor are missing from a dataset."""

    def __init__(self, message: str, missing: tuple[str, ...] = ()):
        self.missing = tuple(missing)
        super().__init__(message)


class FitError(ValidityLabError, RuntimeError):
    """Training diverged or could not proceed."""
