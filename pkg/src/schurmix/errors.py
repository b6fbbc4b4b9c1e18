"""Exception hierarchy shared by every schurmix module."""

from __future__ import annotations


class SchurMixError(Exception):
    """Base class for all errors raised by schurmix."""


class DomainError(SchurMixError, ValueError):
    """An argument lies outside the domain of the requested function."""


class ConvergenceError(SchurMixError, ArithmeticError):
    """A series hit its term cap before meeting the truncation tolerance.

    ``partial_sum`` is the value accumulated so far and ``bound`` the last
    available estimate of the neglected tail.
    """

    def __init__(self, message: str, partial_sum: float = float("nan"),
                 bound: float = float("nan"), terms: int = 0):
        super().__init__(message)
        self.partial_sum = partial_sum
        self.bound = bound
        self.terms = terms


class DefinitenessError(SchurMixError, ValueError):
    """A matrix that must be symmetric positive definite is not.

    ``pivot`` is the 0-based index of the first failing Cholesky pivot.
    """

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


class SingularityError(DefinitenessError):
    """The Gram matrix of the trailing columns of a sample is singular."""


class RankError(SchurMixError, ValueError):
    """The mean matrix does not have the rank the requested law needs."""


class CaseError(SchurMixError, ValueError):
    """The operation is not defined for this distribution regime."""


class SchemaError(SchurMixError, ValueError):
    """A model document does not match the accepted JSON layouts."""

    def __init__(self, message: str, field: str | None = None,
                 line: int | None = None):
        where = []
        if field is not None:
            where.append(f"field {field!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.field = field
        self.line = line
