"""Direct L1 discretization of the Caputo derivative on nonuniform meshes.

The L1 formula replaces v by its piecewise-linear interpolant, giving the
discrete convolution sum_{k=1..n} a_{n-k}(v^k - v^{k-1}).  Evaluating level n
costs O(n) work, O(N^2) over a full run; this module is the correctness
oracle for the compressed fast evaluator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as _gamma

from ..errors import ValidationError
from ..timemesh import TimeMesh

__all__ = [
    "omega",
    "caputo_power_exact",
    "L1Kernel",
    "l1_coefficients",
    "l1_coefficient_table",
    "l1_apply_direct",
]


def omega(mu: float, t):
    """Weakly singular kernel family omega_mu(t) = t**(mu-1) / Gamma(mu).

    Satisfies omega_mu' = omega_{mu-1} and int_0^t omega_mu = omega_{mu+1}(t).
    """
    if not mu > 0.0:
        raise ValidationError(f"omega requires mu > 0, got {mu}")
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0.0):
        raise ValidationError("omega requires t >= 0")
    if mu < 1.0 and np.any(t_arr == 0.0):
        raise ValidationError(f"omega_{mu} is singular at t = 0")
    out = t_arr ** (mu - 1.0) / _gamma(mu)
    return out if np.ndim(t) else float(out)


def caputo_power_exact(sigma_p: float, alpha: float, t):
    """Exact Caputo derivative of order alpha of v(t) = omega_{1+sigma'}(t).

    v(t) = t**sigma' / Gamma(1+sigma') has derivative v' = omega_{sigma'},
    and integrating omega_{1-alpha}(t-s) v'(s) gives omega_{1+sigma'-alpha}(t).
    """
    if not sigma_p > 0.0:
        raise ValidationError("power exponent sigma' must be positive")
    if not 0.0 < alpha < 1.0:
        raise ValidationError("fractional order alpha must lie in (0, 1)")
    return omega(1.0 + sigma_p - alpha, t)


@dataclass(frozen=True)
class L1Kernel:
    """Convolution kernel row a^(n)_j, j = 0..n-1, at a fixed level n.

    ``coeffs[j]`` is a^(n)_j: j = 0 weights the newest increment (interval n)
    and j = n-1 the oldest (interval 1).  All entries are strictly positive
    and strictly decreasing in j.
    """

    n: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs.setflags(write=False)

    @property
    def by_interval(self) -> np.ndarray:
        """Same row reordered to interval order: entry k-1 is a^(n)_{n-k}."""
        return self.coeffs[::-1]


def _weights_by_interval(points: np.ndarray, alpha: float, n: int) -> np.ndarray:
    """a^(n)_{n-k} for k = 1..n (entry k-1), the per-interval kernel means."""
    c = 1.0 / _gamma(2.0 - alpha)
    d = points[n] - points[: n + 1]  # t_n - t_k, k = 0..n
    w = c * d ** (1.0 - alpha)
    w[-1] = 0.0  # omega_{2-alpha}(0) = 0, avoids 0**x edge cases
    return -np.diff(w) / np.diff(points[: n + 1])


def l1_coefficients(mesh: TimeMesh, alpha: float, n: int) -> L1Kernel:
    """Kernel row at level n: a^(n)_{n-k} = mean of omega_{1-alpha}(t_n - s)
    over the k-th interval, in closed form via omega_{2-alpha} differences.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError("fractional order alpha must lie in (0, 1)")
    if not 1 <= n <= mesh.num_steps:
        raise ValidationError(f"level n={n} outside 1..{mesh.num_steps}")
    return L1Kernel(n=n, coeffs=_weights_by_interval(mesh.points, alpha, n)[::-1].copy())


def l1_coefficient_table(mesh: TimeMesh, alpha: float) -> np.ndarray:
    """All kernel rows at once: table[n-1, k-1] = a^(n)_{n-k} for k <= n.

    Entries with k > n are zero.  O(N^2) memory; meant for kernel-property
    scans, not for time stepping.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError("fractional order alpha must lie in (0, 1)")
    pts = mesh.points
    N = mesh.num_steps
    c = 1.0 / _gamma(2.0 - alpha)
    diff = pts[1:, None] - pts[None, : N + 1]  # t_n - t_k
    w = np.zeros_like(diff)
    pos = diff > 0.0
    w[pos] = c * diff[pos] ** (1.0 - alpha)
    table = (w[:, :-1] - w[:, 1:]) / np.diff(pts)[None, :]
    return np.tril(table)


def l1_apply_direct(mesh: TimeMesh, alpha: float, values: np.ndarray, n: int):
    """Direct L1 evaluation sum_{k=1..n} a^(n)_{n-k} (v^k - v^{k-1}).

    ``values`` holds v^0..v^n along axis 0 (extra axes are degrees of
    freedom).  Exact for piecewise-linear v; O(n) work per call.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != n + 1:
        raise ValidationError(
            f"need n+1 = {n + 1} values for level n={n}, got {values.shape[0]}"
        )
    w = _weights_by_interval(mesh.points, alpha, n)
    dv = np.diff(values, axis=0)
    return np.tensordot(w, dv, axes=(0, 0))
