"""Exception types shared by the solvers and the experiment harness."""
from __future__ import annotations


class ContractViolation(AssertionError):
    """A checked identity exceeded its tolerance."""


class NumericalDivergence(FloatingPointError):
    """A field became non-finite during time stepping."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class HistoryError(ValueError):
    """Not enough retained time levels for the requested quantity."""


class PmlError(ValueError):
    """Invalid absorbing-layer configuration."""
