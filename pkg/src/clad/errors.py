"""Exception hierarchy shared across the engine.

Each class maps to one failure family so the CLI can keep exit codes
distinct: configuration problems, malformed trace input, and broken
call contracts are never folded into a single catch-all.
"""

from __future__ import annotations


class CladError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CladError):
    """Invalid run configuration (lengths, thresholds, flag combinations)."""


class ValidationError(CladError):
    """Structurally invalid value passed to an operation (shape, range, NaN)."""


class ContractViolation(CladError):
    """A documented precondition was broken by the caller or an upstream stage."""


class GenerationError(CladError):
    """Infeasible synthetic-instance layout request."""


class TraceParseError(CladError):
    """Malformed step-record input; carries the offending line when known."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
