"""Nonuniform time meshes: graded grids and graded-then-uniform composites.

A graded mesh t_k = T*(k/N)**gamma concentrates points near t=0 to resolve
the weak initial singularity of subdiffusion solutions.  For long-time runs
the composite mesh grades only an initial cell [0, T0] and covers the
remainder with uniform steps no smaller than the last graded step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

__all__ = [
    "TimeMesh",
    "GradedSpec",
    "CompositeSpec",
    "MeshDiagnostics",
    "build_graded",
    "build_composite",
    "mesh_diagnostics",
]


@dataclass(frozen=True)
class TimeMesh:
    """Strictly increasing time points t_0 = 0 < t_1 < ... < t_N.

    Immutable after construction; safe to share across threads.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 2:
            raise ValidationError("mesh needs at least two time points")
        if pts[0] != 0.0:
            raise ValidationError("mesh must start at t0 = 0 exactly")
        if not np.all(np.diff(pts) > 0.0):
            raise ValidationError("mesh points must be strictly increasing")
        pts.setflags(write=False)

    @property
    def num_steps(self) -> int:
        return self.points.size - 1

    @property
    def final_time(self) -> float:
        return float(self.points[-1])

    @property
    def tau(self) -> np.ndarray:
        """Step sizes tau_k = t_k - t_{k-1}, k = 1..N (index k-1)."""
        return np.diff(self.points)

    @property
    def tau_max(self) -> float:
        return float(self.tau.max())

    @property
    def tau_min(self) -> float:
        return float(self.tau.min())

    @property
    def rho(self) -> np.ndarray:
        """Step ratios rho_k = tau_k / tau_{k+1}, k = 1..N-1."""
        tau = self.tau
        return tau[:-1] / tau[1:]

    @property
    def rho_max(self) -> float:
        rho = self.rho
        return float(rho.max()) if rho.size else 1.0

    def to_csv(self, path) -> None:
        """One time point per line, full precision."""
        with open(path, "w") as fh:
            for t in self.points:
                fh.write("%.17g\n" % t)

    @classmethod
    def from_csv(cls, path) -> "TimeMesh":
        pts = np.loadtxt(path, dtype=np.float64, ndmin=1)
        return cls(points=pts)


@dataclass(frozen=True)
class GradedSpec:
    """Graded mesh t_k = T*(k/N)**gamma on [0, T]."""

    T: float
    N: int
    gamma: float = 1.0

    def __post_init__(self):
        if not (self.T > 0.0 and math.isfinite(self.T)):
            raise ValidationError("final time T must be positive")
        if self.N < 1:
            raise ValidationError("number of steps N must be >= 1")
        if not (self.gamma >= 1.0 and math.isfinite(self.gamma)):
            raise ValidationError("grading exponent gamma must be >= 1")


@dataclass(frozen=True)
class CompositeSpec:
    """Graded cell [0, T0], T0 = min(1/gamma, T), then a uniform tail to T.

    The graded part takes N = ceil(NT / (T + 1 - 1/gamma)) of the NT total
    steps; the remaining NT - N uniform steps are then no shorter than the
    last graded step.  When T <= 1/gamma the tail is empty and the mesh is
    purely graded with all NT steps.
    """

    T: float
    NT: int
    gamma: float = 1.0

    def __post_init__(self):
        if not (self.T > 0.0 and math.isfinite(self.T)):
            raise ValidationError("final time T must be positive")
        if self.NT < 1:
            raise ValidationError("total number of steps NT must be >= 1")
        if not (self.gamma >= 1.0 and math.isfinite(self.gamma)):
            raise ValidationError("grading exponent gamma must be >= 1")

    @property
    def T0(self) -> float:
        return min(1.0 / self.gamma, self.T)

    @property
    def N(self) -> int:
        if self.T0 == self.T:
            return self.NT
        return math.ceil(self.NT / (self.T + 1.0 - 1.0 / self.gamma))


@dataclass(frozen=True)
class MeshDiagnostics:
    """Empirical estimates for the mesh-assumption constants."""

    rho_max: float
    C_g_estimate: float
    C_ratio_estimate: float


def build_graded(spec: GradedSpec) -> TimeMesh:
    """Graded mesh with t_k computed from the closed form (no step summation)."""
    k = np.arange(spec.N + 1, dtype=np.float64)
    pts = spec.T * (k / spec.N) ** spec.gamma
    pts[0] = 0.0
    pts[-1] = spec.T
    return TimeMesh(points=pts)


def build_composite(spec: CompositeSpec) -> TimeMesh:
    """Graded points T0*(k/N)**gamma followed by a uniform tail ending at T."""
    T0, N = spec.T0, spec.N
    if T0 == spec.T:
        # tail interval is empty: purely graded over all NT steps
        return build_graded(GradedSpec(T=spec.T, N=spec.NT, gamma=spec.gamma))
    if N >= spec.NT:
        raise ValidationError(
            f"composite mesh degenerate: graded part takes N={N} of NT={spec.NT} "
            "steps, leaving no uniform tail"
        )
    k = np.arange(N + 1, dtype=np.float64)
    graded = T0 * (k / N) ** spec.gamma
    graded[0] = 0.0
    graded[-1] = T0
    tail = np.linspace(T0, spec.T, spec.NT - N + 1)[1:]
    pts = np.concatenate([graded, tail])
    mesh = TimeMesh(points=pts)
    tau_tail = (spec.T - T0) / (spec.NT - N)
    tau_last_graded = graded[-1] - graded[-2]
    if tau_tail < tau_last_graded * (1.0 - 1e-12):
        raise ValidationError(
            f"uniform tail step {tau_tail:g} is smaller than the last graded "
            f"step {tau_last_graded:g}"
        )
    return mesh


def mesh_diagnostics(mesh: TimeMesh, gamma: float) -> MeshDiagnostics:
    """Estimate the mesh-assumption constants for a given grading exponent.

    C_g_estimate = max_k tau_k / (tau * min(1, t_k^(1-1/gamma))) and
    C_ratio_estimate = max_{k>=2} t_k / t_{k-1}.  Both are empirical: no
    pass/fail threshold exists, the constants are merely required to be finite.
    A single-interval mesh reports the neutral value 1 for the ratio maxima.
    """
    tau = mesh.tau
    t = mesh.points[1:]
    cap = np.minimum(1.0, t ** (1.0 - 1.0 / gamma))
    c_g = float(np.max(tau / (mesh.tau_max * cap)))
    if mesh.num_steps >= 2:
        c_ratio = float(np.max(mesh.points[2:] / mesh.points[1:-1]))
    else:
        c_ratio = 1.0
    return MeshDiagnostics(
        rho_max=mesh.rho_max,
        C_g_estimate=c_g,
        C_ratio_estimate=c_ratio,
    )
