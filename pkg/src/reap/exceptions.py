"""REAP exception hierarchy."""

from __future__ import annotations


class ReapError(Exception):
    """Base class for all reap errors."""


class DomainError(ReapError, ValueError):
    """Raised when an argument violates an operation's precondition.

    Attributes:
        field: Name of the offending argument or model field.
    """

    def __init__(self, message: str, *, field: str) -> None:
        super().__init__(message)
        self.field = field


class ScenarioError(DomainError):
    """Raised when a scenario as a whole cannot be solved or instantiated."""


class ConfigError(ReapError):
    """Raised when an experiment configuration cannot be loaded or interpreted."""


class NumericalError(ReapError):
    """Raised on an internal numerical failure (no bracket, no feasible point, ...)."""


class ContinuousSolverError(NumericalError):
    """Raised when the continuous-type solver cannot produce a valid contract function."""


class OracleError(NumericalError):
    """Raised when a brute-force oracle cannot run or finds no feasible grid point."""


class ConstraintViolationError(ReapError):
    """Raised when a menu fails a constraint that the caller asked to enforce.

    Attributes:
        constraint: Identifier of the violated constraint, e.g. ``ic[1->2]``.
        residual: Signed residual; negative means violated.
    """

    def __init__(self, constraint: str, residual: float) -> None:
        super().__init__(f"constraint {constraint} violated (residual={residual:.6g})")
        self.constraint = constraint
        self.residual = residual
