"""
Cocycle Lab - Errors
Exception hierarchy; the CLI maps these onto exit codes 2 and 3.
"""

from typing import Optional


class CocycleLabError(Exception):
    """Base class for every error raised by the lab."""

    exit_code = 1


class ValidationError(CocycleLabError, ValueError):
    """Bad input: model text, frequency, flags or preconditions."""

    exit_code = 2


class DegenerateModelError(CocycleLabError, RuntimeError):
    """The numerics have nothing meaningful to report."""

    exit_code = 3


class InsufficientDataError(DegenerateModelError):
    """Too few usable samples for a regression."""


class SingularStepError(DegenerateModelError):
    """An orbit point hit a zero of a or a logarithmic singularity."""

    def __init__(self, message: str, k: int, z: Optional[complex] = None):
        super().__init__(f"{message} (k={k}, z={z})")
        self.k = k
        self.z = z


class TerminatingExpansionError(CocycleLabError, ArithmeticError):
    """beta_hat requested for a rational frequency whose expansion ended."""

    exit_code = 2
