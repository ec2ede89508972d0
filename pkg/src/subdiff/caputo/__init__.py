"""Caputo-derivative discretizations: direct L1, SOE compression, fast L1."""

from .l1 import (
    L1Kernel,
    caputo_power_exact,
    l1_apply_direct,
    l1_coefficient_table,
    l1_coefficients,
    omega,
)
from .soe import SoeApprox, local_weight_b, soe_build, soe_kernel_error
from .fast import (
    ComplementaryKernel,
    ConsistencyScan,
    FastHistory,
    complementary_identity_residual,
    complementary_kernel,
    consistency_rate_scan,
    discrete_kernel_A,
    discrete_kernel_rows,
    fast_history_update,
    fast_l1_apply,
)

__all__ = [
    "L1Kernel",
    "caputo_power_exact",
    "l1_apply_direct",
    "l1_coefficient_table",
    "l1_coefficients",
    "omega",
    "SoeApprox",
    "local_weight_b",
    "soe_build",
    "soe_kernel_error",
    "ComplementaryKernel",
    "ConsistencyScan",
    "FastHistory",
    "complementary_identity_residual",
    "complementary_kernel",
    "consistency_rate_scan",
    "discrete_kernel_A",
    "discrete_kernel_rows",
    "fast_history_update",
    "fast_l1_apply",
]
