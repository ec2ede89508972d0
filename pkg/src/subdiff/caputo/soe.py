"""Sum-of-exponentials compression of the singular kernel omega_{1-alpha}.

Discretizes the Laplace representation

    omega_{1-alpha}(t) = sin(pi*alpha)/pi * int_0^inf exp(-t*s) s^(alpha-1) ds

with Gauss-Jacobi quadrature (weight s^(alpha-1)) on the singular end and
Gauss-Legendre quadrature on dyadic panels [2^m, 2^(m+1)] up to the cutoff
needed at t = dt.  Nodes and weights are positive by construction.

Certification demands the ABSOLUTE error <= eps down to t = dt, where the
kernel itself can exceed 1/eps of that; node/weight values and the
certification arithmetic therefore use extended precision throughout
(float64-rounded rules bottom out near |omega(dt)| * 1e-16, which for small
dt and large alpha sits above practically relevant tolerances).  Callers
doing bulk float64 work should cast ``nodes``/``weights`` once up front.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from ..errors import SoeCertificationError, ValidationError

__all__ = ["SoeApprox", "soe_build", "soe_kernel_error", "local_weight_b"]

_CERT_SAMPLES = 10_000
_MAX_ROUNDS = 10

_LD = np.longdouble
_PI = _LD("3.1415926535897932384626433832795029")


def _gamma_ld(x: float) -> np.longdouble:
    """Gamma(x) accurate to longdouble precision."""
    with mpmath.workdps(30):
        return _LD(mpmath.nstr(mpmath.gamma(mpmath.mpf(x)), 27))


@dataclass(frozen=True)
class SoeApprox:
    """Certified exponential-sum approximation of omega_{1-alpha} on [dt, T].

    max_{t in [dt, T]} |omega_{1-alpha}(t) - sum_l weights[l]*exp(-nodes[l]*t)|
    is at most ``eps`` on the certification samples.  ``nodes`` and
    ``weights`` are extended-precision arrays; immutable and freely
    shareable across threads.
    """

    alpha: float
    eps: float
    dt: float
    T: float
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)
        if np.any(self.nodes <= 0.0) or np.any(self.weights <= 0.0):
            raise ValidationError("SOE nodes and weights must be strictly positive")

    @property
    def nq(self) -> int:
        return self.nodes.size

    def evaluate(self, t):
        """sum_l weights[l] * exp(-nodes[l] * t), vectorized over t."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=_LD))
        out = (np.exp(-t_arr[:, None] * self.nodes) @ self.weights).astype(np.float64)
        return out if np.ndim(t) else float(out[0])

    def save(self, path) -> None:
        """Plain text: header `alpha eps dt T Nq`, then `theta weight` lines."""
        with open(path, "w") as fh:
            fh.write(
                "%.17g %.17g %.17g %.17g %d\n"
                % (self.alpha, self.eps, self.dt, self.T, self.nq)
            )
            for th, w in zip(self.nodes, self.weights):
                fh.write(
                    np.format_float_scientific(th, precision=25)
                    + " "
                    + np.format_float_scientific(w, precision=25)
                    + "\n"
                )

    @classmethod
    def load(cls, path) -> "SoeApprox":
        with open(path) as fh:
            header = fh.readline().split()
            if len(header) != 5:
                raise ValidationError(f"malformed SOE header in {path}")
            alpha, eps, dt, T = map(float, header[:4])
            nq = int(header[4])
            data = np.loadtxt(fh, dtype=_LD, ndmin=2)
        if data.shape != (nq, 2):
            raise ValidationError(
                f"expected {nq} node/weight pairs in {path}, got {data.shape[0]}"
            )
        return cls(alpha=alpha, eps=eps, dt=dt, T=T,
                   nodes=data[:, 0].copy(), weights=data[:, 1].copy())


def _legendre_rule_ld(n: int):
    """Gauss-Legendre nodes/weights on [-1, 1] to longdouble accuracy.

    Newton-polishes the float64 nodes using the three-term recurrence; the
    float64 originals are accurate enough that three iterations converge.
    """
    x = roots_legendre(n)[0].astype(_LD)

    def eval_p(x):
        p0, p1 = np.ones_like(x), x.copy()
        for k in range(2, n + 1):
            p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / _LD(k)
        dp = _LD(n) * (x * p1 - p0) / (x * x - 1)
        return p1, dp

    for _ in range(3):
        p, dp = eval_p(x)
        x = x - p / dp
    _, dp = eval_p(x)
    w = _LD(2) / ((1 - x * x) * dp * dp)
    return x, w


def _quadrature(alpha: float, n_jac: int, n_gl: int, m_lo: int, m_hi: int):
    """Positive nodes/weights for the Laplace integral of omega_{1-alpha}.

    Gauss-Jacobi with weight s^(alpha-1) on [0, 2^m_lo], then Gauss-Legendre
    on each dyadic panel [2^m, 2^(m+1)], m = m_lo..m_hi-1, with s^(alpha-1)
    folded into the panel weights.  The Jacobi panel's contribution is O(1)
    so its float64 roots suffice; the large-s panels carry values of size
    omega(dt) and are assembled in extended precision.
    """
    al = _LD(alpha)
    fac = np.sin(_PI * al) / _PI
    nodes = []
    weights = []
    L = _LD(2.0) ** m_lo
    xj, wj = roots_jacobi(n_jac, 0.0, alpha - 1.0)
    nodes.append(L * (_LD(1) + xj.astype(_LD)) / _LD(2))
    weights.append(fac * (L / _LD(2)) ** al * wj.astype(_LD))
    xg, wg = _legendre_rule_ld(n_gl)
    for m in range(m_lo, m_hi):
        a, b = _LD(2.0) ** m, _LD(2.0) ** (m + 1)
        s = _LD(0.5) * (b - a) * xg + _LD(0.5) * (a + b)
        nodes.append(s)
        weights.append(fac * _LD(0.5) * (b - a) * wg * s ** (al - 1))
    return np.concatenate(nodes), np.concatenate(weights)


def soe_kernel_error(soe: SoeApprox, samples) -> float:
    """max over samples of |omega_{1-alpha}(t) - exponential sum|.

    Samples must lie in the certified window [dt, T].  Evaluated in extended
    precision so the result reflects the stored rule rather than float64
    summation round-off (which near t = dt can dwarf tight tolerances).
    """
    t = np.atleast_1d(np.asarray(samples, dtype=np.float64))
    if np.any(t < soe.dt * (1.0 - 1e-12)) or np.any(t > soe.T * (1.0 + 1e-12)):
        raise ValidationError("kernel-error samples outside the window [dt, T]")
    tl = t.astype(_LD)
    exact = tl ** _LD(-soe.alpha) / _gamma_ld(1.0 - soe.alpha)
    approx = np.exp(-tl[:, None] * np.asarray(soe.nodes, dtype=_LD)) @ np.asarray(
        soe.weights, dtype=_LD
    )
    return float(np.max(np.abs(exact - approx)))


def soe_build(alpha: float, eps: float, dt: float, T: float) -> SoeApprox:
    """Build a certified SoeApprox for omega_{1-alpha} on [dt, T].

    Panel node counts escalate until the certification error on 10^4
    log-uniform samples drops below eps/2; the node count grows
    polylogarithmically in 1/eps and T/dt.  Raises SoeCertificationError
    with the achieved error if escalation runs out.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError("fractional order alpha must lie in (0, 1)")
    if not 0.0 < eps < 1.0:
        raise ValidationError("tolerance eps must lie in (0, 1)")
    if not 0.0 < dt < T:
        raise ValidationError("need 0 < dt < T")

    fac = math.sin(math.pi * alpha) / math.pi
    # truncation cutoff: the tail beyond s_hi contributes < eps/4 at t >= dt
    s_hi = max(2.0, math.log(4.0 * fac / (eps * dt)) / dt)
    m_hi = math.ceil(math.log2(s_hi))
    # start the dyadic panels at 2^-m with 2^-m <= 1/T so the Jacobi panel
    # never has to resolve exp(-t*s) oscillating over many decay lengths
    m_lo = -max(0, math.ceil(math.log2(max(T, 1.0))))

    lneps = math.log(1.0 / eps)
    n_gl0 = max(6, math.ceil(0.35 * lneps) + 2)
    n_jac0 = max(8, math.ceil(0.35 * lneps) + 2)

    samples = np.geomspace(dt, T, _CERT_SAMPLES)
    samples[0], samples[-1] = dt, T

    err = math.inf
    soe = None
    for r in range(_MAX_ROUNDS):
        nodes, weights = _quadrature(alpha, n_jac0 + 4 * r, n_gl0 + 2 * r, m_lo, m_hi)
        soe = SoeApprox(alpha=alpha, eps=eps, dt=dt, T=T, nodes=nodes, weights=weights)
        err = soe_kernel_error(soe, samples)
        if err <= eps / 2.0:
            return soe
    raise SoeCertificationError(
        f"SOE certification failed for alpha={alpha}, eps={eps:g}, dt={dt:g}, "
        f"T={T:g}: achieved error {err:.3e} with {soe.nq} nodes",
        achieved_error=err,
        nq=soe.nq,
    )


def local_weight_b(theta, tau: float):
    """Per-step weight b = (1/tau) * int_0^tau exp(-theta*(tau-s)) ds.

    Equals (1 - exp(-theta*tau)) / (theta*tau), strictly decreasing in
    theta*tau with values in (0, 1).  A 4-term Taylor branch below 1e-6
    avoids the 1 - exp cancellation.
    """
    x = np.asarray(theta, dtype=np.float64) * tau
    small = x < 1e-6
    out = np.where(
        small,
        1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0,
        -np.expm1(-np.where(small, 1.0, x)) / np.where(small, 1.0, x),
    )
    return out if np.ndim(theta) else float(out)
