"""Exception hierarchy.

Every error carries a stable ``code`` equal to its class name; the CLI prints
it so scripts can match on it.
"""

from __future__ import annotations


class LvpopError(Exception):
    """Base class for all package errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


class InvalidProtocol(LvpopError):
    """A protocol definition violates one or more constraints.

    ``violations`` lists every problem found as ``(code, message)`` pairs;
    the raised class corresponds to the first one.
    """

    def __init__(self, message: str, violations: list[tuple[str, str]] | None = None):
        super().__init__(message)
        self.violations = violations if violations is not None else [(self.code, message)]

    @property
    def codes(self) -> list[str]:
        return [c for c, _ in self.violations]


class NonZeroDiagonal(InvalidProtocol):
    pass


class ProbabilityOutOfRange(InvalidProtocol):
    pass


class IsolatedType(InvalidProtocol):
    pass


class DuplicateRule(InvalidProtocol):
    pass


class MalformedProtocol(InvalidProtocol):
    """Structural problem: wrong shapes, unknown labels, bad kind."""


class UnknownBuiltin(LvpopError):
    pass


class NotLvKind(LvpopError):
    pass


class NotRps(LvpopError):
    pass


class ZeroPopulation(LvpopError):
    pass


class EmptyPopulation(LvpopError):
    pass


class AbsorbingState(LvpopError):
    pass


class InvalidGraph(LvpopError):
    pass


class LpInfeasible(LvpopError):
    pass


class NumericallyIllConditioned(LvpopError):
    pass


class StepSizeTooLarge(LvpopError):
    pass


class FixedPoint(LvpopError):
    pass


class NoReturnWithinBound(LvpopError):
    pass


class UnabsorbedTrials(LvpopError):
    pass


class InvalidConfig(LvpopError):
    pass
