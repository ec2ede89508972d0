"""Newton-linearized time stepping for semilinear subdiffusion problems.

Each level solves one SPD system

    [a0 - lap - f'(u^{n-1})] du = lap u^{n-1} + f(u^{n-1}) + g(., t_n) - hist

where hist is the Caputo history term: the SOE-compressed exponential state
in fast mode, or the full L1 convolution over stored increments in direct
mode.  Time stepping is sequential; everything within a step is
data-parallel over grid nodes.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import gamma as _gamma

from . import _kernels
from .caputo.l1 import _weights_by_interval, omega
from .caputo.soe import SoeApprox, local_weight_b, soe_build
from .errors import ValidationError
from .spatial2d import SpatialGrid2D, laplacian, solve_shifted
from .timemesh import TimeMesh

__all__ = [
    "SemilinearProblem",
    "RunConfig",
    "RunResult",
    "TimeStepper",
    "run",
    "fisher_problem",
    "manufactured_fisher_problem",
    "compute_error",
    "estimate_order",
    "difference_quotients",
    "SingularityScan",
    "singularity_scan",
    "DEFAULT_PROBE_POINTS",
]


@dataclass(frozen=True)
class SemilinearProblem:
    """Reaction f(u), forcing g(x, y, t), initial field and optional exact solution.

    ``g`` and ``exact`` may be None (no forcing / no error measurement).
    ``domain`` is (x_l, x_r, y_l, y_r).
    """

    f: Callable
    fprime: Callable
    u0: Callable
    g: Optional[Callable] = None
    exact: Optional[Callable] = None
    domain: tuple = (0.0, math.pi, 0.0, math.pi)
    name: str = ""

    def check_derivative(self, samples=None, tol: float = 1e-6) -> None:
        """Spot-check that fprime matches a centered difference of f."""
        u = np.linspace(-2.0, 2.0, 9) if samples is None else np.asarray(samples)
        d = 1e-5
        approx = (self.f(u + d) - self.f(u - d)) / (2.0 * d)
        worst = float(np.max(np.abs(self.fprime(u) - approx)))
        if worst > tol:
            raise ValidationError(
                f"fprime disagrees with finite differences of f (max dev {worst:.2e})"
            )

    def make_grid(self, m1: int, m2: int | None = None) -> SpatialGrid2D:
        x_l, x_r, y_l, y_r = self.domain
        return SpatialGrid2D(x_l=x_l, x_r=x_r, y_l=y_l, y_r=y_r,
                             m1=m1, m2=m2 if m2 is not None else m1)


@dataclass(frozen=True)
class RunConfig:
    """Discretization parameters for one solve."""

    alpha: float
    mesh: TimeMesh
    grid: SpatialGrid2D
    eps_soe: float = 1e-12
    kernel_mode: str = "fast"
    cg_tol: float = 1e-11
    cg_maxiter: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError("fractional order alpha must lie in (0, 1)")
        if not self.eps_soe > 0.0:
            raise ValidationError("SOE tolerance must be positive")
        if self.kernel_mode not in ("fast", "direct"):
            raise ValidationError("kernel_mode must be 'fast' or 'direct'")


@dataclass
class RunResult:
    """Final field, per-level errors and timing of one run."""

    u_final: np.ndarray
    N: int
    M: int
    level_errors: Optional[np.ndarray]
    wall_seconds: float
    cpu_seconds: float
    nq: Optional[int]
    times: np.ndarray

    @property
    def e(self) -> Optional[float]:
        if self.level_errors is None:
            return None
        return float(np.max(self.level_errors))

    def to_csv(self, path) -> None:
        """Per-level rows `n, t_n, error`, then `summary, N, M, e, wall_seconds, Nq`."""
        with open(path, "w") as fh:
            fh.write("n,t_n,error\n")
            for n in range(1, self.N + 1):
                err = "" if self.level_errors is None else "%.17g" % self.level_errors[n - 1]
                fh.write("%d,%.17g,%s\n" % (n, self.times[n], err))
            e = "" if self.e is None else "%.17g" % self.e
            nq = "" if self.nq is None else str(self.nq)
            fh.write("summary,%d,%d,%s,%.6g,%s\n"
                     % (self.N, self.M, e, self.wall_seconds, nq))


class TimeStepper:
    """Advances the linearized scheme one level at a time.

    Holds the current field (full grid function, zero boundary), the
    exponential history (fast mode) or the increment buffer (direct mode).
    """

    def __init__(self, problem: SemilinearProblem, config: RunConfig,
                 soe: SoeApprox | None = None):
        problem.check_derivative()
        self.problem = problem
        self.config = config
        self.grid = config.grid
        self.mesh = config.mesh
        self.alpha = config.alpha
        self._g2ma = _gamma(2.0 - config.alpha)
        self._ndof = (self.grid.m1 - 1) * (self.grid.m2 - 1)
        self._Xint, self._Yint = self.grid.interior_meshgrid()

        self.u = self.grid.sample_homogeneous(problem.u0)
        self.level = 0
        self._du_prev = np.zeros(self.grid.shape)
        self._cbuf = np.zeros(self.grid.shape)
        self._rbuf = np.zeros(self.grid.shape)

        if config.kernel_mode == "fast":
            if soe is None:
                soe = soe_build(config.alpha, config.eps_soe,
                                dt=self.mesh.tau_min, T=self.mesh.final_time)
            self.soe = soe
            self._theta = np.asarray(soe.nodes, dtype=np.float64)
            self._varpi = np.asarray(soe.weights, dtype=np.float64)
            self._H = np.zeros((self._ndof, soe.nq))
            self._tau_cached = -1.0
            self._dU = None
        else:
            self.soe = None
            self._H = None
            self._dU = np.zeros((self.mesh.num_steps, self._ndof))

    @property
    def t(self) -> float:
        return float(self.mesh.points[self.level])

    @property
    def nq(self) -> Optional[int]:
        return self.soe.nq if self.soe is not None else None

    def _history_term(self, n: int, tau_n: float) -> np.ndarray:
        if self.soe is not None:
            if abs(tau_n - self._tau_cached) > 1e-14 * tau_n:
                self._decay = np.exp(-self._theta * tau_n)
                self._b = local_weight_b(self._theta, tau_n)
                self._wdecay = self._varpi * self._decay
                self._tau_cached = tau_n
            return self._H @ self._wdecay
        w = _weights_by_interval(self.mesh.points, self.alpha, n)
        return w[: n - 1] @ self._dU[: n - 1]

    def step(self) -> None:
        """Advance from level n-1 to n."""
        n = self.level + 1
        if n > self.mesh.num_steps:
            raise ValidationError("time mesh exhausted")
        tau_n = float(self.mesh.tau[n - 1])
        a0 = tau_n ** -self.alpha / self._g2ma
        uint = self.u[1:-1, 1:-1]

        hist = self._history_term(n, tau_n).reshape(self.grid.interior_shape)
        rhs = laplacian(self.grid, self.u) + self.problem.f(uint) - hist
        if self.problem.g is not None:
            rhs = rhs + self.problem.g(self._Xint, self._Yint, self.mesh.points[n])
        self._rbuf[1:-1, 1:-1] = rhs
        self._cbuf[1:-1, 1:-1] = self.problem.fprime(uint)

        du = solve_shifted(self.grid, a0, self._cbuf, self._rbuf,
                           tol=self.config.cg_tol, maxiter=self.config.cg_maxiter,
                           x0=self._du_prev)
        self.u += du
        self._du_prev = du
        duint = du[1:-1, 1:-1].ravel()
        if self.soe is not None:
            _kernels.history_update(self._H, self._decay, self._b, duint)
        else:
            self._dU[n - 1] = duint
        self.level = n

    def error_now(self) -> float:
        """Max-norm interior error against the exact solution at the current level."""
        if self.problem.exact is None:
            raise ValidationError("problem has no exact solution")
        exact = self.problem.exact(self._Xint, self._Yint, self.t)
        return float(np.max(np.abs(exact - self.u[1:-1, 1:-1])))


def run(problem: SemilinearProblem, config: RunConfig) -> RunResult:
    """Execute all time levels; the reported timing covers the loop only."""
    stepper = TimeStepper(problem, config)
    N = config.mesh.num_steps
    errors = np.zeros(N) if problem.exact is not None else None
    wall0 = time.perf_counter()
    cpu0 = time.process_time()
    for n in range(1, N + 1):
        stepper.step()
        if errors is not None:
            errors[n - 1] = stepper.error_now()
    wall = time.perf_counter() - wall0
    cpu = time.process_time() - cpu0
    return RunResult(
        u_final=stepper.u,
        N=N,
        M=max(config.grid.m1, config.grid.m2),
        level_errors=errors,
        wall_seconds=wall,
        cpu_seconds=cpu,
        nq=stepper.nq,
        times=config.mesh.points,
    )


def fisher_problem() -> SemilinearProblem:
    """Fisher reaction f(u) = u(1-u) on (0, pi)^2, u0 = sin x sin y, no forcing."""
    return SemilinearProblem(
        f=lambda u: u * (1.0 - u),
        fprime=lambda u: 1.0 - 2.0 * u,
        u0=lambda x, y: np.sin(x) * np.sin(y),
        g=None,
        exact=None,
        name="fisher",
    )


def manufactured_fisher_problem(sigma: float, alpha: float) -> SemilinearProblem:
    """Fisher problem forced so that u = omega_{1+sigma}(t) sin x sin y exactly.

    Using -lap(sin x sin y) = 2 sin x sin y, the forcing is
    g = [omega_{1+sigma-alpha}(t) + 2 omega_{1+sigma}(t)] sin x sin y - u(1-u),
    and the solution starts from u0 = 0 with regularity exponent sigma.
    """
    if not (0.0 < sigma < 2.0) or sigma == 1.0:
        raise ValidationError("regularity sigma must lie in (0,1) or (1,2)")
    if not 0.0 < alpha < 1.0:
        raise ValidationError("fractional order alpha must lie in (0, 1)")

    def exact(x, y, t):
        return omega(1.0 + sigma, t) * np.sin(x) * np.sin(y)

    def g(x, y, t):
        s = np.sin(x) * np.sin(y)
        u = omega(1.0 + sigma, t) * s
        return (omega(1.0 + sigma - alpha, t) + 2.0 * omega(1.0 + sigma, t)) * s - u * (1.0 - u)

    return SemilinearProblem(
        f=lambda u: u * (1.0 - u),
        fprime=lambda u: 1.0 - 2.0 * u,
        u0=lambda x, y: np.zeros_like(x),
        g=g,
        exact=exact,
        name=f"manufactured-fisher-sigma{sigma:g}",
    )


def compute_error(result: RunResult) -> float:
    """e(N, M) = max over levels of the per-level max-norm errors."""
    if result.level_errors is None:
        raise ValidationError("run recorded no errors: problem has no exact solution")
    return float(np.max(result.level_errors))


def estimate_order(e_N: float, e_2N: float) -> float:
    """Observed convergence order log2(e_N / e_2N) between N and 2N."""
    if not (e_N > 0.0 and e_2N > 0.0):
        raise ValidationError("order estimate needs positive errors")
    return math.log2(e_N / e_2N)


def difference_quotients(times: np.ndarray, series: np.ndarray) -> np.ndarray:
    """Per-level quotients (v^n - v^{n-1}) / tau_n along axis 0 of ``series``."""
    times = np.asarray(times, dtype=np.float64)
    dt = np.diff(times)
    dv = np.diff(np.asarray(series, dtype=np.float64), axis=0)
    return dv / (dt[:, None] if dv.ndim > 1 else dt)


DEFAULT_PROBE_POINTS = (
    (math.pi / 4.0, math.pi / 4.0),
    (math.pi / 2.0, math.pi / 2.0),
    (3.0 * math.pi / 4.0, math.pi / 4.0),
)


@dataclass
class SingularityScan:
    """Difference quotients du/tau at probe nodes, with log-log slope fits.

    ``slopes`` fits over all levels with t_n <= T/10 (the CSV contract);
    ``asymptotic_slopes`` fits over the first decade of mesh data,
    t_n <= 10 t_1, where a graded mesh resolves the singular layer and the
    quotients of a solution behaving like t^alpha show slope alpha - 1.
    """

    times: np.ndarray           # t_1..t_N
    quotients: np.ndarray       # (N, number of probes)
    slopes: np.ndarray          # fit over t_n <= T/10
    asymptotic_slopes: np.ndarray   # fit over t_n <= 10 t_1
    probe_indices: list

    def rows(self):
        for n in range(self.times.size):
            yield (self.times[n], *self.quotients[n])


def _singular_abscissa(points: np.ndarray, alpha: float) -> np.ndarray:
    """Mean-value abscissa t* per interval for a pure t^alpha mode.

    Solves (t_n^a - t_{n-1}^a)/tau_n = a t*^(a-1): the time at which the
    quotient equals the derivative of the singular mode, exact even on
    strongly graded meshes where the log-midpoint misrepresents wide cells.
    """
    ratio = (points[1:] ** alpha - points[:-1] ** alpha) / (np.diff(points) * alpha)
    return ratio ** (1.0 / (alpha - 1.0))


def _fit_slope(abscissa: np.ndarray, q: np.ndarray, keep: np.ndarray) -> float:
    keep = keep & (np.abs(q) > 0.0)
    if keep.sum() < 2:
        return float("nan")
    x = np.log(abscissa[keep])
    y = np.log(np.abs(q[keep]))
    x = x - x.mean()
    return float(np.dot(x, y - y.mean()) / np.dot(x, x))


def singularity_scan(problem: SemilinearProblem, config: RunConfig,
                     probe_points=DEFAULT_PROBE_POINTS) -> SingularityScan:
    """Track first-order difference quotients at probe nodes through a run.

    Probe coordinates snap to the nearest grid node.  Slopes are fitted over
    the first decade t <= T/10; for a solution behaving like t^alpha near
    t = 0 the slopes approach alpha - 1.
    """
    grid = config.grid
    idx = []
    for (px, py) in probe_points:
        i = int(round((px - grid.x_l) / grid.h1))
        j = int(round((py - grid.y_l) / grid.h2))
        if not (0 < i < grid.m1 and 0 < j < grid.m2):
            raise ValidationError(f"probe point {(px, py)} is not interior")
        idx.append((i, j))

    stepper = TimeStepper(problem, config)
    N = config.mesh.num_steps
    values = np.zeros((N + 1, len(idx)))
    values[0] = [stepper.u[i, j] for (i, j) in idx]
    for n in range(1, N + 1):
        stepper.step()
        values[n] = [stepper.u[i, j] for (i, j) in idx]

    pts = config.mesh.points
    q = difference_quotients(pts, values)
    t_right = pts[1:]
    t_mid = 0.5 * (pts[:-1] + pts[1:])
    # n = 1 is dropped from the T/10 window: its quotient estimates u_t at an
    # interior point of [0, t_1] the midpoint abscissa misrepresents
    keep_decade = t_right <= config.mesh.final_time / 10.0
    keep_decade[0] = False
    keep_first = t_right <= 10.0 * pts[1]
    t_star = _singular_abscissa(pts, config.alpha)
    slopes = np.array([
        _fit_slope(t_mid, q[:, p], keep_decade) for p in range(len(idx))
    ])
    asym = np.array([
        _fit_slope(t_star, q[:, p], keep_first) for p in range(len(idx))
    ])
    return SingularityScan(
        times=t_right.copy(),
        quotients=q,
        slopes=slopes,
        asymptotic_slopes=asym,
        probe_indices=idx,
    )
