"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so keep the split between
input validation, numerical failure and kernel-compression failure intact.
"""

from __future__ import annotations


class ValidationError(ValueError):
    """Invalid user input: mesh/grid specs, parameter ranges, shapes."""


class SolverError(RuntimeError):
    """Numerical failure inside a linear solve or the time loop."""


class IndefiniteOperatorError(SolverError):
    """The shifted operator is not positive definite (a0 too small)."""


class SolverConvergenceError(SolverError):
    """Iterative solve hit its iteration cap before reaching tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SoeCertificationError(RuntimeError):
    """Exponential-sum construction could not reach the requested tolerance."""

    def __init__(self, message: str, achieved_error: float, nq: int):
        super().__init__(message)
        self.achieved_error = achieved_error
        self.nq = nq
