"""Fast nonuniform-mesh L1 solvers for semilinear subdiffusion equations.

Building blocks: graded/composite time meshes (`timemesh`), direct and
SOE-compressed Caputo discretizations (`caputo`), a tensor-product 2D
finite-difference layer (`spatial2d`), the Newton-linearized time stepper
(`solver`), a CPU-time scaling harness (`benchmark`) and a CSV-emitting
experiment CLI (`cli`).
"""

from .errors import (
    IndefiniteOperatorError,
    SoeCertificationError,
    SolverConvergenceError,
    SolverError,
    ValidationError,
)
from .timemesh import (
    CompositeSpec,
    GradedSpec,
    MeshDiagnostics,
    TimeMesh,
    build_composite,
    build_graded,
    mesh_diagnostics,
)
from .caputo import (
    ComplementaryKernel,
    FastHistory,
    L1Kernel,
    SoeApprox,
    caputo_power_exact,
    complementary_kernel,
    consistency_rate_scan,
    discrete_kernel_A,
    fast_history_update,
    fast_l1_apply,
    l1_apply_direct,
    l1_coefficients,
    local_weight_b,
    omega,
    soe_build,
    soe_kernel_error,
)
from .spatial2d import (
    SpatialGrid2D,
    inner,
    laplacian,
    norm_l2,
    norm_max,
    seminorm_h1,
    solve_shifted,
)
from .solver import (
    RunConfig,
    RunResult,
    SemilinearProblem,
    TimeStepper,
    compute_error,
    estimate_order,
    fisher_problem,
    manufactured_fisher_problem,
    run,
    singularity_scan,
)
from .benchmark import fisher_benchmark

__version__ = "0.1.0"
