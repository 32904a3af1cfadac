"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class CoxkitError(Exception):
    """Base class for library errors."""


class DomainError(CoxkitError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigError(CoxkitError, ValueError):
    """A prior, multiplier rule or config record is malformed."""


class ConsistencyError(CoxkitError, ArithmeticError):
    """An internal identity failed numerically (signals an implementation bug)."""


class DegenerateEstimateError(CoxkitError, ArithmeticError):
    """Every importance weight vanished: the prior cannot explain the observation."""


class RefinementError(CoxkitError, ArithmeticError):
    """An oracle could not reach the requested accuracy."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
