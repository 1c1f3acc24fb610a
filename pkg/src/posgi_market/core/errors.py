"""Exceptions shared across the services."""

from __future__ import annotations


class NumericDomainError(ArithmeticError):
    """Raised when a computation leaves the finite floating point domain."""


class UsageError(ValueError):
    """Raised when command line arguments or input files are invalid."""


class EquilibriumNotFoundError(RuntimeError):
    """Raised when the LP finds no correlated equilibrium for a stage game.

    Every finite game has one, so this always signals a solver defect.
    """


__all__ = ["EquilibriumNotFoundError", "NumericDomainError", "UsageError"]
