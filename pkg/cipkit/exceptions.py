"""
This module defines custom exceptions for the cipkit solver kernel.
"""

from typing import Optional


class CipkitError(Exception):
    """Base class for all errors raised by cipkit."""

    pass


class ParsingError(CipkitError):
    """Custom exception for errors while reading an instance file."""

    def __init__(self, message: str, line_no: Optional[int] = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ModelError(CipkitError):
    """Raised when problem data violates the model invariants."""

    pass


class LpError(CipkitError):
    """Base class for misuse of LP results."""

    pass


class NotBasicError(LpError):
    """Raised when a tableau row is requested for a nonbasic variable."""

    pass


class NotOptimalError(LpError):
    """Raised when an operation needs an optimal LP but got something else."""

    pass


class CutError(CipkitError):
    """Raised for invalid cut or split derivation requests."""

    pass


class IncompatibleCutsError(CutError):
    """Raised when two cuts describe an empty region."""

    pass


class BudgetExceededError(CipkitError):
    """Raised when an enumeration or search exceeds its node budget."""

    pass


class SymmetryError(CipkitError):
    """Raised when a problem contains constraints the graph builder cannot encode."""

    pass


class SignomialError(CipkitError):
    """Raised for signomial terms outside the supported domain."""

    pass


class BenchError(CipkitError):
    """Raised for invalid benchmark configuration or missing baselines."""

    pass
