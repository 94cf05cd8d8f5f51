"""Exception hierarchy shared by every stage of the solver pipeline."""

from __future__ import annotations


class DDEError(Exception):
    """Base class for all errors raised by dtmdde."""


# series arithmetic

class CenterMismatch(DDEError):
    pass


class OrderTooLow(DDEError):
    pass


class DivisionBySmallLeadingCoefficient(DDEError):
    pass


# model parsing / validation

class ModelError(DDEError):
    """A model file or DelayModel violates one of its structural invariants."""


class ModelSyntaxError(ModelError):
    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.reason = message


class UnknownDelayIndex(ModelError):
    pass


class DerivativeOrderTooHigh(ModelError):
    pass


class HistoryContainsState(ModelError):
    pass


class NonIntegerExponent(ModelError):
    pass


# lowering

class LoweringError(DDEError):
    pass


class ImplicitRecurrence(LoweringError):
    pass


class UnsupportedCurrentStateDenominator(LoweringError):
    pass


class UnsupportedCurrentStateInExp(LoweringError):
    pass


# scheduling / evaluation domain

class TooManySegments(DDEError):
    pass


class OutOfDomain(DDEError):
    pass


# numerical blow-up

class NonFiniteCoefficient(DDEError):
    def __init__(self, message: str, segment: int | None = None):
        super().__init__(message)
        self.segment = segment


class NonFiniteState(DDEError):
    pass


class StepTooLarge(DDEError):
    pass
