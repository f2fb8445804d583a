"""Exception types raised across the package."""

from __future__ import annotations


class BinfitError(Exception):
    """Base class for all package errors."""


class DomainError(BinfitError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class BinValidationError(BinfitError, ValueError):
    """A binned sample violates a structural invariant.

    Attributes
    ----------
    index : int
        Position of the offending bin after sorting by lower bound.
    """

    def __init__(self, index: int, message: str = ""):
        self.index = index
        super().__init__(f"bin {index}: {message}" if message else f"bin {index}")


class OverlappingBins(BinValidationError):
    pass


class NonContiguousBins(BinValidationError):
    pass


class NegativeCount(BinValidationError):
    pass


class UnboundedInteriorBin(BinValidationError):
    pass


class DegenerateBin(BinValidationError):
    """Lower bound is not strictly below the upper bound, or is negative."""


class ParseError(BinfitError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class MissingColumn(BinfitError, KeyError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(column)

    def __str__(self) -> str:
        return f"missing column: {self.column!r}"


class NonConvergent(BinfitError):
    """Adaptive quadrature could not meet its tolerance.

    ``estimate`` and ``error`` hold the last partial result; a diverging
    moment integral typically surfaces here.
    """

    def __init__(self, message: str, estimate: float = float("nan"), error: float = float("inf")):
        self.estimate = estimate
        self.error = error
        super().__init__(message)


class IneligibleSample(BinfitError):
    pass


class AllGridPointsFailed(BinfitError):
    pass


class NoViableCandidate(BinfitError):
    pass


class EmptyInput(BinfitError, ValueError):
    pass


class EmptyEstimatorSet(BinfitError, ValueError):
    pass
