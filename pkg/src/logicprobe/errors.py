"""Exception types shared across the package."""

from __future__ import annotations


class LogicProbeError(Exception):
    """Base class for package errors."""


class ParseError(LogicProbeError):
    """Malformed program text or sentence. Carries line/column when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}" + (f", col {column}" if column is not None else "") + f": {message}"
        super().__init__(message)


class NonStratifiedError(LogicProbeError):
    """The predicate dependency graph has a cycle through negation."""

    def __init__(self, cycle: tuple[str, ...]):
        self.cycle = tuple(cycle)
        super().__init__("no stratification exists; negative cycle through " + " -> ".join(self.cycle))


class UnsupportedShape(LogicProbeError):
    """No template covers this clause or query shape."""


class GenerationExhausted(LogicProbeError):
    """Rejection sampling gave up (bounded attempts exceeded)."""


class NoQueryFound(LogicProbeError):
    """The theory admits no query matching the requested depth/label bucket."""


class InsufficientFacts(LogicProbeError):
    """A substitution needs at least one other fact in the context."""


class VictimUnavailable(LogicProbeError):
    """External victim did not answer within the retry budget."""


class NonFiniteGradient(LogicProbeError):
    """A training step produced a non-finite gradient and was aborted."""
