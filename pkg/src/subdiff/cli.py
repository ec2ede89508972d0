"""Command-line harness for the convergence, singularity, benchmark and
SOE-report experiments.  Each invocation runs one experiment and emits one
CSV (stdout or --out); all numeric output uses 17 significant digits.

Exit codes: 0 success, 2 validation error, 3 numerical failure,
4 SOE certification failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .benchmark import fisher_benchmark
from .caputo.soe import soe_build, soe_kernel_error
from .errors import SoeCertificationError, SolverError, ValidationError
from .solver import (
    RunConfig,
    compute_error,
    fisher_problem,
    manufactured_fisher_problem,
    run,
    singularity_scan,
)
from .timemesh import CompositeSpec, GradedSpec, build_composite, build_graded

__all__ = [
    "main",
    "build_parser",
    "cmd_convergence",
    "cmd_singularity",
    "cmd_benchmark",
    "cmd_soe_report",
]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_CERTIFICATION = 4


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad numeric list {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"bad integer list {text!r}") from exc


def _fmt(x: float) -> str:
    return "%.17g" % x


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("SUBDIFF_WORKERS", "1")))
    except ValueError:
        return 1


def _build_mesh(kind: str, T: float, N: int, gamma: float):
    if kind == "graded":
        return build_graded(GradedSpec(T=T, N=N, gamma=gamma))
    return build_composite(CompositeSpec(T=T, NT=N, gamma=gamma))


def cmd_convergence(args):
    """Manufactured-solution refinement sweep: rows `N, M, error, order`."""
    alpha = args.alpha if args.alpha is not None else 0.4
    sigma = args.sigma if args.sigma is not None else 2.0 - alpha
    gamma = args.gamma if args.gamma is not None else 1.0
    T = args.T if args.T is not None else 1.0
    N_list = _ints(args.N) if args.N else [50, 100, 200]
    eps = args.eps_soe if args.eps_soe is not None else 1e-12
    cg_tol = args.cg_tol if args.cg_tol is not None else 1e-11
    problem = manufactured_fisher_problem(sigma, alpha)

    def one(N: int) -> tuple[int, int, float]:
        M = args.M if args.M is not None else N
        mesh = _build_mesh(args.mesh or "graded", T, N, gamma)
        config = RunConfig(alpha=alpha, mesh=mesh, grid=problem.make_grid(M),
                           eps_soe=eps, kernel_mode=args.kernel or "fast",
                           cg_tol=cg_tol)
        return N, M, compute_error(run(problem, config))

    workers = _workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, N_list))
    else:
        results = [one(N) for N in N_list]

    lines = ["N,M,error,order"]
    for i, (N, M, err) in enumerate(results):
        if i == 0:
            order = ""
        else:
            order = _fmt(np.log(results[i - 1][2] / err) / np.log(N / results[i - 1][0]))
        lines.append(f"{N},{M},{_fmt(err)},{order}")
    lines.append(f"target,,,{_fmt(min(gamma * sigma, 2.0 - alpha))}")
    return lines, EXIT_OK


def cmd_singularity(args):
    """Difference-quotient scan at probe nodes: rows `t_n, q1, q2, q3`."""
    alpha = args.alpha if args.alpha is not None else 0.4
    gamma = args.gamma if args.gamma is not None else 1.0
    T = args.T if args.T is not None else 1.0 / gamma
    NT = (_ints(args.NT) if args.NT else [100])[0]
    M = args.M if args.M is not None else 100
    eps = args.eps_soe if args.eps_soe is not None else 1e-12
    cg_tol = args.cg_tol if args.cg_tol is not None else 1e-11

    problem = fisher_problem()
    mesh = _build_mesh(args.mesh or "composite", T, NT, gamma)
    config = RunConfig(alpha=alpha, mesh=mesh, grid=problem.make_grid(M),
                       eps_soe=eps, kernel_mode=args.kernel or "fast",
                       cg_tol=cg_tol)
    scan = singularity_scan(problem, config)

    lines = ["t_n,q1,q2,q3"]
    for row in scan.rows():
        lines.append(",".join(_fmt(x) for x in row))
    lines.append("slope," + ",".join(_fmt(s) for s in scan.slopes))
    return lines, EXIT_OK


def cmd_benchmark(args):
    """CPU-time sweep of both kernel modes: rows `NT, seconds_fast, seconds_direct`."""
    NT_list = _ints(args.NT) if args.NT else [512, 1024, 2048, 4096, 8192]
    result = fisher_benchmark(
        NT_list,
        M=args.M if args.M is not None else 16,
        alpha=args.alpha if args.alpha is not None else 0.5,
        gamma=args.gamma if args.gamma is not None else 2.0,
        T=args.T if args.T is not None else 50.0,
        eps_soe=args.eps_soe if args.eps_soe is not None else 1e-12,
        cg_tol=args.cg_tol if args.cg_tol is not None else 1e-8,
    )
    lines = ["NT,seconds_fast,seconds_direct"]
    for row in result.rows:
        lines.append(f"{row.NT},{_fmt(row.seconds_fast)},{_fmt(row.seconds_direct)}")
    lines.append(f"slope,{_fmt(result.slope_fast)},{_fmt(result.slope_direct)}")
    return lines, EXIT_OK


def cmd_soe_report(args):
    """Certification sweep: rows `alpha, eps, dt, T, Nq, certified_error`.

    Construction failures are reported in their row, where the achieved
    error exceeds eps, and turn the exit code into a certification failure.
    """
    alphas = _floats(args.alpha_list) if args.alpha_list else (
        [args.alpha] if args.alpha is not None else [0.5])
    eps_list = _floats(args.eps_list) if args.eps_list else (
        [args.eps_soe] if args.eps_soe is not None else [1e-12])
    T_list = _floats(args.T_list) if args.T_list else (
        [args.T] if args.T is not None else [1.0])
    dt = args.dt if args.dt is not None else 1e-6

    lines = ["alpha,eps,dt,T,Nq,certified_error"]
    status = EXIT_OK
    for alpha in alphas:
        for eps in eps_list:
            for T in T_list:
                try:
                    soe = soe_build(alpha, eps, dt, T)
                    err = soe_kernel_error(soe, np.geomspace(dt, T, 10_000))
                    nq = soe.nq
                except SoeCertificationError as exc:
                    err, nq = exc.achieved_error, exc.nq
                    status = EXIT_CERTIFICATION
                lines.append(
                    f"{_fmt(alpha)},{_fmt(eps)},{_fmt(dt)},{_fmt(T)},{nq},{_fmt(err)}"
                )
    return lines, status


_COMMANDS = {
    "convergence": cmd_convergence,
    "singularity": cmd_singularity,
    "benchmark": cmd_benchmark,
    "soe-report": cmd_soe_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="subdiff",
        description="Benchmark harness for fast nonuniform-mesh subdiffusion solvers.",
    )
    p.add_argument("--experiment", required=True, choices=sorted(_COMMANDS))
    p.add_argument("--alpha", type=float, help="fractional order in (0,1)")
    p.add_argument("--sigma", type=float, help="regularity exponent of the exact solution")
    p.add_argument("--gamma", type=float, help="mesh grading exponent >= 1")
    p.add_argument("--N", type=str, help="comma list of time-step counts (M = N unless --M)")
    p.add_argument("--NT", type=str, help="comma list of total step counts")
    p.add_argument("--M", type=int, help="spatial cells per direction")
    p.add_argument("--T", type=float, help="final time")
    p.add_argument("--eps-soe", dest="eps_soe", type=float, help="SOE tolerance")
    p.add_argument("--dt", type=float, help="SOE cutoff time (soe-report)")
    p.add_argument("--mesh", choices=["graded", "composite"], help="time mesh family")
    p.add_argument("--kernel", choices=["fast", "direct"], help="Caputo kernel mode")
    p.add_argument("--cg-tol", dest="cg_tol", type=float, help="linear solve tolerance")
    p.add_argument("--alpha-list", dest="alpha_list", type=str,
                   help="comma list of alphas (soe-report)")
    p.add_argument("--eps-list", dest="eps_list", type=str,
                   help="comma list of tolerances (soe-report)")
    p.add_argument("--T-list", dest="T_list", type=str,
                   help="comma list of horizons (soe-report)")
    p.add_argument("--out", type=str, help="output CSV path (default stdout)")
    return p


def _emit(lines: list[str], out: str | None) -> None:
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        lines, status = _COMMANDS[args.experiment](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SoeCertificationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    _emit(lines, args.out)
    return status


if __name__ == "__main__":
    sys.exit(main())
