"""Exception hierarchy shared across the package."""

from __future__ import annotations

from typing import Any


class SpilloverError(Exception):
    """Base class for all package errors."""


class DataError(SpilloverError):
    """Malformed or inconsistent input data."""


class IngestError(DataError):
    """A CSV file could not be parsed.

    Attributes
    ----------
    row, column : location of the offending cell, if known.
    """

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class DomainError(DataError):
    """A value falls outside the mathematical domain of an operation."""


class EstimationError(SpilloverError):
    """Model estimation failed."""


class RankDeficientError(EstimationError):
    """Regressor matrix does not have full column rank."""

    def __init__(self, message: str, columns: list[str] | None = None):
        super().__init__(message)
        self.columns = columns or []


class ConvergenceError(EstimationError):
    """Optimizer failed to converge; carries the best point found."""

    def __init__(self, message: str, best: Any = None, flag: str = "nonconvergence"):
        super().__init__(message)
        self.best = best
        self.flag = flag


class DegenerateWeightWarning(UserWarning):
    """All capitalization weights vanish on some date."""


class ConvergenceWarning(UserWarning):
    """Fit completed but a diagnostic flag was raised."""
