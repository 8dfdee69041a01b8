"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain where the function is defined."""


class LabelMismatchError(ValueError):
    """Two distributions are not defined over the same label set."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before meeting its tolerance.

    Attributes:
        residual: Last residual observed by the solver.
        iterations: Number of iterations performed.
        diagnostics: Free-form solver state useful for debugging.
    """

    def __init__(self, message, residual=float("nan"), iterations=0, **diagnostics):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.diagnostics = diagnostics

    def to_dict(self):
        return {
            "error": type(self).__name__,
            "message": str(self),
            "residual": self.residual,
            "iterations": self.iterations,
            **{k: v for k, v in self.diagnostics.items()},
        }


class BracketError(ConvergenceError):
    """No sign-changing bracket could be established for a root search."""
