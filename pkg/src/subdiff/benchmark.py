"""CPU-time scaling harness: fast two-level kernel vs direct L1 convolution.

Runs the Fisher problem (no forcing, no error tracking) through the
compiled time loops in `_kernels` so measured times contain only numerical
work.  The direct kernel does O(n) history work per step, the fast kernel
O(N_q); at fixed spatial resolution the contrast shows up as log-log CPU
slopes near 2 and near 1 respectively.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as _gamma

from . import _kernels
from .caputo.soe import soe_build
from .errors import SolverError
from .timemesh import CompositeSpec, build_composite

__all__ = ["BenchmarkRow", "BenchmarkResult", "fisher_benchmark", "warm_up_kernels"]


@dataclass(frozen=True)
class BenchmarkRow:
    NT: int
    seconds_fast: float
    seconds_direct: float
    nq: int


@dataclass(frozen=True)
class BenchmarkResult:
    rows: list
    slope_fast: float
    slope_direct: float
    M: int
    alpha: float
    gamma: float
    T: float


def _interior_u0(M: int) -> np.ndarray:
    x = np.linspace(0.0, np.pi, M + 1)[1:-1]
    return np.sin(x)[:, None] * np.sin(x)[None, :]


def warm_up_kernels() -> None:
    """Trigger JIT compilation outside any timed region."""
    mesh = build_composite(CompositeSpec(T=2.0, NT=8, gamma=2.0))
    soe = soe_build(0.5, 1e-6, dt=mesh.tau_min, T=mesh.final_time)
    h2 = (np.pi / 4.0) ** -2
    g2ma = _gamma(1.5)
    u = _interior_u0(4)
    _kernels.fisher_loop_fast(u.copy(), mesh.tau, 0.5, g2ma,
                              soe.nodes.astype(np.float64),
                              soe.weights.astype(np.float64), h2, h2, 1e-8, 80)
    _kernels.fisher_loop_direct(u.copy(), mesh.points, 0.5, g2ma, h2, h2, 1e-8, 80)


def _loglog_slope(ns, ts) -> float:
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.maximum(np.asarray(ts, dtype=float), 1e-9))
    x = x - x.mean()
    return float(np.dot(x, y - y.mean()) / np.dot(x, x))


def _time_loop(fn) -> float:
    """Wall time of fn(), min of two repeats for sub-second runs.

    The monotonic wall clock is used because the process CPU clock is
    quantized to 10 ms ticks on some kernels, which would swamp the smaller
    sweep entries; the loops are single threaded so wall tracks CPU.
    """
    t0 = time.perf_counter()
    fn()
    best = time.perf_counter() - t0
    if best < 0.5:
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def fisher_benchmark(NT_list, *, M: int = 16, alpha: float = 0.5,
                     gamma: float = 2.0, T: float = 50.0,
                     eps_soe: float = 1e-12,
                     cg_tol: float = 1e-8) -> BenchmarkResult:
    """Time both kernel modes over a sweep of total step counts.

    Reported seconds cover the time loop only; mesh and SOE construction
    are excluded.  The CG tolerance defaults looser than the accuracy-run
    default because it prices the shared linear solve, not the solution
    error, in a timing experiment.
    """
    warm_up_kernels()
    g2ma = float(_gamma(2.0 - alpha))
    rows = []
    maxiter = 20 * M
    status = [_kernels.PCG_OK]

    def checked(fn):
        def runner():
            u = _interior_u0(M)
            st, _ = fn(u)
            status[0] = st
        return runner

    for NT in NT_list:
        mesh = build_composite(CompositeSpec(T=T, NT=int(NT), gamma=gamma))
        h1i2 = 1.0 / (np.pi / M) ** 2
        soe = soe_build(alpha, eps_soe, dt=mesh.tau_min, T=mesh.final_time)
        theta64 = soe.nodes.astype(np.float64)
        varpi64 = soe.weights.astype(np.float64)

        sec_fast = _time_loop(checked(lambda u: _kernels.fisher_loop_fast(
            u, mesh.tau, alpha, g2ma, theta64, varpi64, h1i2, h1i2,
            cg_tol, maxiter)))
        if status[0] != _kernels.PCG_OK:
            raise SolverError(f"fast benchmark run failed at NT={NT}")

        sec_direct = _time_loop(checked(lambda u: _kernels.fisher_loop_direct(
            u, mesh.points, alpha, g2ma, h1i2, h1i2, cg_tol, maxiter)))
        if status[0] != _kernels.PCG_OK:
            raise SolverError(f"direct benchmark run failed at NT={NT}")

        rows.append(BenchmarkRow(NT=int(NT), seconds_fast=sec_fast,
                                 seconds_direct=sec_direct, nq=soe.nq))

    ns = [r.NT for r in rows]
    return BenchmarkResult(
        rows=rows,
        slope_fast=_loglog_slope(ns, [r.seconds_fast for r in rows]),
        slope_direct=_loglog_slope(ns, [r.seconds_direct for r in rows]),
        M=M,
        alpha=alpha,
        gamma=gamma,
        T=T,
    )
