"""
Exception types shared by the analysis, simulation and command-line layers.
"""

from __future__ import annotations

from typing import Optional, Tuple


class EngineError(Exception):
    """Base class for every error raised by the engine."""

    exit_code = 2


class DomainError(EngineError, ValueError):
    """Argument outside the region a special function is defined for here."""


class ConfigError(EngineError):
    """
    Invalid scenario configuration.

    Parameters:
        message (str): Human readable description.
        key (Optional[str]): Offending configuration key, dotted path.
    Returns:
        None
    Raises:
        None
    """

    exit_code = 1

    def __init__(self, message: str, key: Optional[str] = None) -> None:
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class NumericalError(EngineError):
    """Numerical failure: budget, convergence or shape restrictions."""


class BudgetExceededError(NumericalError):
    """Composition enumeration would exceed the configured term budget."""


class ConvergenceError(NumericalError):
    """
    Iterative method or quadrature did not reach its tolerance.

    Parameters:
        message (str): Description of the failure.
        estimates (Tuple[float, ...]): Last estimates produced before giving up.
    Returns:
        None
    Raises:
        None
    """

    def __init__(self, message: str, estimates: Tuple[float, ...] = ()) -> None:
        self.estimates = tuple(estimates)
        if estimates:
            message = f"{message} (last estimates: {', '.join(f'{v:.6g}' for v in estimates)})"
        super().__init__(message)


class ShapeIntegralityError(NumericalError):
    """Closed-form path needs integer shape parameters; use the quadrature method."""
