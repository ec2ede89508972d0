"""Tensor-product 2D finite differences: Laplacian, discrete norms, and the
shifted SPD solve performed once per time step.

Grid functions are plain float64 arrays of shape (m1+1, m2+1) covering all
nodes, index [i, j] with i along x.  Members of the homogeneous space carry
zero boundary values; operators read them, the solver writes them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    IndefiniteOperatorError,
    SolverConvergenceError,
    ValidationError,
)

__all__ = [
    "SpatialGrid2D",
    "laplacian",
    "mixed_second_diff",
    "inner",
    "norm_l2",
    "seminorm_h1",
    "norm_max",
    "solve_shifted",
    "save_field_csv",
    "load_field_csv",
]


@dataclass(frozen=True)
class SpatialGrid2D:
    """Uniform tensor grid on (x_l, x_r) x (y_l, y_r) with m1 x m2 cells."""

    x_l: float
    x_r: float
    y_l: float
    y_r: float
    m1: int
    m2: int

    def __post_init__(self):
        if not (self.x_r > self.x_l and self.y_r > self.y_l):
            raise ValidationError("domain bounds must satisfy x_l < x_r, y_l < y_r")
        if self.m1 < 2 or self.m2 < 2:
            raise ValidationError("need at least 2 cells per direction")

    @property
    def h1(self) -> float:
        return (self.x_r - self.x_l) / self.m1

    @property
    def h2(self) -> float:
        return (self.y_r - self.y_l) / self.m2

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_l, self.x_r, self.m1 + 1)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.y_l, self.y_r, self.m2 + 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m1 + 1, self.m2 + 1)

    @property
    def interior_shape(self) -> tuple[int, int]:
        return (self.m1 - 1, self.m2 - 1)

    def meshgrid(self):
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    def interior_meshgrid(self):
        return np.meshgrid(self.xs[1:-1], self.ys[1:-1], indexing="ij")

    def sample(self, fn) -> np.ndarray:
        """Evaluate fn(x, y) at all nodes."""
        X, Y = self.meshgrid()
        return np.asarray(fn(X, Y), dtype=np.float64)

    def sample_homogeneous(self, fn) -> np.ndarray:
        """Sample fn and force zero boundary values."""
        u = self.sample(fn)
        u[0, :] = 0.0
        u[-1, :] = 0.0
        u[:, 0] = 0.0
        u[:, -1] = 0.0
        return u


def _check_shape(grid: SpatialGrid2D, v: np.ndarray) -> None:
    if v.shape != grid.shape:
        raise ValidationError(f"expected grid function of shape {grid.shape}, got {v.shape}")


def laplacian(grid: SpatialGrid2D, v: np.ndarray) -> np.ndarray:
    """Five-point Laplacian at interior nodes; exact for quadratics."""
    _check_shape(grid, v)
    h1sq, h2sq = grid.h1 ** 2, grid.h2 ** 2
    return (v[:-2, 1:-1] - 2.0 * v[1:-1, 1:-1] + v[2:, 1:-1]) / h1sq + (
        v[1:-1, :-2] - 2.0 * v[1:-1, 1:-1] + v[1:-1, 2:]
    ) / h2sq


def mixed_second_diff(grid: SpatialGrid2D, v: np.ndarray) -> np.ndarray:
    """Mixed difference d_x d_y v at cell centers; diagnostic only."""
    _check_shape(grid, v)
    return np.diff(np.diff(v, axis=0), axis=1) / (grid.h1 * grid.h2)


def inner(grid: SpatialGrid2D, v: np.ndarray, w: np.ndarray) -> float:
    """Discrete L2 inner product h1 h2 sum over interior nodes."""
    _check_shape(grid, v)
    _check_shape(grid, w)
    return float(grid.h1 * grid.h2 * np.sum(v[1:-1, 1:-1] * w[1:-1, 1:-1]))


def norm_l2(grid: SpatialGrid2D, v: np.ndarray) -> float:
    return math.sqrt(inner(grid, v, v))


def seminorm_h1(grid: SpatialGrid2D, v: np.ndarray) -> float:
    """Discrete H1 seminorm from forward differences, boundary rows included."""
    _check_shape(grid, v)
    dx = np.diff(v, axis=0) / grid.h1
    dy = np.diff(v, axis=1) / grid.h2
    s = np.sum(dx[:, 1:-1] ** 2) + np.sum(dy[1:-1, :] ** 2)
    return math.sqrt(grid.h1 * grid.h2 * s)


def norm_max(grid: SpatialGrid2D, v: np.ndarray) -> float:
    _check_shape(grid, v)
    return float(np.max(np.abs(v[1:-1, 1:-1])))


def solve_shifted(grid: SpatialGrid2D, a0: float, c: np.ndarray, rhs: np.ndarray,
                  *, tol: float = 1e-11, maxiter: int | None = None,
                  x0: np.ndarray | None = None) -> np.ndarray:
    """Solve (a0 - lap - diag(c)) w = rhs for w with zero boundary values.

    The system is SPD when a0 exceeds max(c); this is enforced up front and
    negative curvature inside CG is treated as a hard error.  The returned
    field satisfies ||A w - rhs|| <= tol * ||rhs|| (exact zero for rhs = 0).
    ``c``, ``rhs`` and optional warm start ``x0`` are full grid functions;
    only interior values are read.
    """
    _check_shape(grid, c)
    _check_shape(grid, rhs)
    cint = np.ascontiguousarray(c[1:-1, 1:-1])
    if not a0 > float(cint.max()):
        raise IndefiniteOperatorError(
            f"shift a0={a0:g} does not dominate the reaction field "
            f"(max c = {float(cint.max()):g}); system may be indefinite"
        )
    if maxiter is None:
        maxiter = 20 * max(grid.m1, grid.m2)
    bint = np.ascontiguousarray(rhs[1:-1, 1:-1])
    x = (
        np.ascontiguousarray(x0[1:-1, 1:-1])
        if x0 is not None
        else np.zeros(grid.interior_shape)
    )
    h1i2, h2i2 = 1.0 / grid.h1 ** 2, 1.0 / grid.h2 ** 2
    status, it, relres = _kernels.pcg_solve(a0, cint, bint, x, h1i2, h2i2, tol, maxiter)
    if status == _kernels.PCG_MAXITER and it < maxiter:
        # recurrence drift: true residual missed the target, polish from x
        status, it2, relres = _kernels.pcg_solve(
            a0, cint, bint, x, h1i2, h2i2, tol, maxiter - it
        )
        it += it2
    if status == _kernels.PCG_INDEFINITE:
        raise IndefiniteOperatorError(
            "negative curvature encountered in CG; operator is not positive definite"
        )
    if status == _kernels.PCG_MAXITER:
        raise SolverConvergenceError(
            f"CG stalled at relative residual {relres:.3e} after {it} iterations "
            f"(target {tol:g})",
            residual=relres,
            iterations=it,
        )
    out = np.zeros(grid.shape)
    out[1:-1, 1:-1] = x
    return out


def save_field_csv(grid: SpatialGrid2D, v: np.ndarray, path) -> None:
    """Row-major CSV, one line per j index, full precision."""
    _check_shape(grid, v)
    np.savetxt(path, v.T, delimiter=",", fmt="%.17g")


def load_field_csv(grid: SpatialGrid2D, path) -> np.ndarray:
    v = np.loadtxt(path, delimiter=",", ndmin=2).T
    _check_shape(grid, np.asarray(v))
    return np.ascontiguousarray(v)
