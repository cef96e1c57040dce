"""Exception hierarchy shared by the solvers, verifiers and the CLI."""

from __future__ import annotations


class PricemixError(Exception):
    """Base class for all pricemix errors."""


class InvalidConfigError(PricemixError, ValueError):
    """Market parameters or a configuration file are invalid."""

    def __init__(self, message: str, location: str | None = None) -> None:
        """Initialize the error.

        Args:
            message: What is wrong
            location: Where it is wrong, e.g. "line 4" or "field q1"
        """
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class InvalidStrategyError(PricemixError, ValueError):
    """A strategy or profile violates its construction invariants."""


class NumericalError(PricemixError, ArithmeticError):
    """A solver could not produce a consistent answer."""

    def __init__(self, message: str, residual: float | None = None) -> None:
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)


class ConvergenceError(NumericalError):
    """An accepted solution fails its independent residual check."""


class NoHypothesisError(PricemixError):
    """No equilibrium structure exists for the market (monopoly or invalid)."""


class EnumerationLimitError(PricemixError):
    """The opponent availability enumeration exceeds the configured cap."""
