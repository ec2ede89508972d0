"""Numba-compiled hot loops: the Jacobi-PCG solve, history updates and the
Fisher benchmark time loops.

Everything here operates on interior-node arrays of shape (m1-1, m2-1) with
the homogeneous Dirichlet boundary implied.  The benchmark drivers exist so
that CPU-time scaling measurements see only the per-step numerical work and
no per-step interpreter overhead; they implement exactly the same scheme as
the general solver loop and are tested against it.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# pcg status codes
PCG_OK = 0
PCG_MAXITER = 1
PCG_INDEFINITE = 2


@njit(cache=True, fastmath=True)
def laplacian_interior(w, h1i2, h2i2, out):
    """Five-point Laplacian of an interior field with zero boundary values."""
    m1, m2 = w.shape
    for i in range(m1):
        for j in range(m2):
            v = -2.0 * (h1i2 + h2i2) * w[i, j]
            if i > 0:
                v += h1i2 * w[i - 1, j]
            if i < m1 - 1:
                v += h1i2 * w[i + 1, j]
            if j > 0:
                v += h2i2 * w[i, j - 1]
            if j < m2 - 1:
                v += h2i2 * w[i, j + 1]
            out[i, j] = v
    return out


@njit(cache=True, fastmath=True)
def pcg_solve(a0, c, b, x, h1i2, h2i2, tol, maxiter):
    """Jacobi-preconditioned CG for (a0 - lap - diag(c)) x = b, zero BC.

    ``x`` holds the initial guess on entry and the solution on exit.
    Returns (status, iterations, relative residual of the true residual).
    Stops on the recurrence residual at a 0.25 safety factor; the returned
    residual is recomputed from x so the caller can verify the contract.
    """
    m1, m2 = b.shape
    dcen = a0 + 2.0 * (h1i2 + h2i2)

    bnorm2 = 0.0
    for i in range(m1):
        for j in range(m2):
            bnorm2 += b[i, j] * b[i, j]
    if bnorm2 == 0.0:
        for i in range(m1):
            for j in range(m2):
                x[i, j] = 0.0
        return PCG_OK, 0, 0.0

    r = np.empty((m1, m2))
    z = np.empty((m1, m2))
    p = np.empty((m1, m2))
    ap = np.empty((m1, m2))

    rz = 0.0
    for i in range(m1):
        for j in range(m2):
            av = (dcen - c[i, j]) * x[i, j]
            if i > 0:
                av -= h1i2 * x[i - 1, j]
            if i < m1 - 1:
                av -= h1i2 * x[i + 1, j]
            if j > 0:
                av -= h2i2 * x[i, j - 1]
            if j < m2 - 1:
                av -= h2i2 * x[i, j + 1]
            ri = b[i, j] - av
            r[i, j] = ri
            zi = ri / (dcen - c[i, j])
            z[i, j] = zi
            p[i, j] = zi
            rz += ri * zi

    stop2 = (0.25 * tol) * (0.25 * tol) * bnorm2
    it = 0
    while it < maxiter:
        rn2 = 0.0
        for i in range(m1):
            for j in range(m2):
                rn2 += r[i, j] * r[i, j]
        if rn2 <= stop2:
            break
        pap = 0.0
        for i in range(m1):
            for j in range(m2):
                av = (dcen - c[i, j]) * p[i, j]
                if i > 0:
                    av -= h1i2 * p[i - 1, j]
                if i < m1 - 1:
                    av -= h1i2 * p[i + 1, j]
                if j > 0:
                    av -= h2i2 * p[i, j - 1]
                if j < m2 - 1:
                    av -= h2i2 * p[i, j + 1]
                ap[i, j] = av
                pap += p[i, j] * av
        if pap <= 0.0:
            return PCG_INDEFINITE, it, math.sqrt(rn2 / bnorm2)
        alpha = rz / pap
        rzn = 0.0
        for i in range(m1):
            for j in range(m2):
                x[i, j] += alpha * p[i, j]
                rn = r[i, j] - alpha * ap[i, j]
                r[i, j] = rn
                zn = rn / (dcen - c[i, j])
                z[i, j] = zn
                rzn += rn * zn
        beta = rzn / rz
        rz = rzn
        for i in range(m1):
            for j in range(m2):
                p[i, j] = z[i, j] + beta * p[i, j]
        it += 1

    # true residual from x, independent of the recurrence
    rn2 = 0.0
    for i in range(m1):
        for j in range(m2):
            av = (dcen - c[i, j]) * x[i, j]
            if i > 0:
                av -= h1i2 * x[i - 1, j]
            if i < m1 - 1:
                av -= h1i2 * x[i + 1, j]
            if j > 0:
                av -= h2i2 * x[i, j - 1]
            if j < m2 - 1:
                av -= h2i2 * x[i, j + 1]
            d = b[i, j] - av
            rn2 += d * d
    relres = math.sqrt(rn2 / bnorm2)
    status = PCG_OK if relres <= tol else PCG_MAXITER
    return status, it, relres


@njit(cache=True, fastmath=True)
def history_update(H, decay, b, dv):
    """H[d, l] <- decay[l] * H[d, l] + b[l] * dv[d], one fused pass."""
    ndof, nq = H.shape
    flat = dv.ravel()
    for d in range(ndof):
        x = flat[d]
        for l in range(nq):
            H[d, l] = decay[l] * H[d, l] + b[l] * x


@njit(cache=True, fastmath=True)
def _soe_step_weights(theta, varpi, tau, decay, b, wdecay):
    """Per-step decay factors and local weights for step size tau."""
    for l in range(theta.shape[0]):
        x = theta[l] * tau
        e = math.exp(-x)
        decay[l] = e
        if x < 1e-6:
            b[l] = 1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0
        else:
            b[l] = (1.0 - e) / x
        wdecay[l] = varpi[l] * e


@njit(cache=True, fastmath=True)
def fisher_loop_fast(u, tau, alpha, g2ma, theta, varpi, h1i2, h2i2, tol, maxiter):
    """Fisher time loop (f = u(1-u), g = 0) with the two-level fast L1 formula.

    Mutates ``u`` (interior field) through all len(tau) levels and returns
    (status, total CG iterations).  Matches the general solver step exactly;
    kept free of interpreter overhead for CPU-time scaling runs.
    """
    m1, m2 = u.shape
    nq = theta.shape[0]
    N = tau.shape[0]
    H = np.zeros((m1 * m2, nq))
    decay = np.empty(nq)
    b = np.empty(nq)
    wdecay = np.empty(nq)
    rhs = np.empty((m1, m2))
    cfield = np.empty((m1, m2))
    du = np.zeros((m1, m2))
    tau_prev = -1.0
    total_it = 0
    for n in range(1, N + 1):
        tn = tau[n - 1]
        if abs(tn - tau_prev) > 1e-14 * tn:
            _soe_step_weights(theta, varpi, tn, decay, b, wdecay)
            tau_prev = tn
        a0 = tn ** -alpha / g2ma
        # rhs = lap(u) + u(1-u) - sum_l wdecay[l] H[., l]
        laplacian_interior(u, h1i2, h2i2, rhs)
        for i in range(m1):
            for j in range(m2):
                hterm = 0.0
                d = i * m2 + j
                for l in range(nq):
                    hterm += wdecay[l] * H[d, l]
                ui = u[i, j]
                rhs[i, j] += ui * (1.0 - ui) - hterm
                cfield[i, j] = 1.0 - 2.0 * ui
        status, it, _ = pcg_solve(a0, cfield, rhs, du, h1i2, h2i2, tol, maxiter)
        total_it += it
        if status == PCG_INDEFINITE:
            return status, total_it
        for i in range(m1):
            for j in range(m2):
                d = i * m2 + j
                x = du[i, j]
                u[i, j] += x
                for l in range(nq):
                    H[d, l] = decay[l] * H[d, l] + b[l] * x
    return PCG_OK, total_it


@njit(cache=True, fastmath=True)
def fisher_loop_direct(u, points, alpha, g2ma, h1i2, h2i2, tol, maxiter):
    """Fisher time loop with the direct nonuniform L1 formula.

    Recomputes the level-n kernel row each step and convolves it with all
    stored increments: O(n) work per step and O(N * M) storage, the
    uncompressed reference the fast loop is benchmarked against.
    """
    m1, m2 = u.shape
    N = points.shape[0] - 1
    ndof = m1 * m2
    dU = np.empty((N, ndof))
    w = np.empty(N)
    hist = np.empty(ndof)
    rhs = np.empty((m1, m2))
    cfield = np.empty((m1, m2))
    du = np.zeros((m1, m2))
    total_it = 0
    ex = 1.0 - alpha
    for n in range(1, N + 1):
        tn = points[n]
        # interval-ordered kernel row: w[k-1] = a^(n)_{n-k}, k = 1..n
        prev = (tn - points[0]) ** ex
        for k in range(1, n + 1):
            d = tn - points[k]
            cur = d ** ex if d > 0.0 else 0.0
            w[k - 1] = (prev - cur) / (g2ma * (points[k] - points[k - 1]))
            prev = cur
        a0 = w[n - 1]
        # history sum streams the increment buffer row by row
        for d in range(ndof):
            hist[d] = 0.0
        for k in range(n - 1):
            wk = w[k]
            for d in range(ndof):
                hist[d] += wk * dU[k, d]
        laplacian_interior(u, h1i2, h2i2, rhs)
        for i in range(m1):
            for j in range(m2):
                ui = u[i, j]
                rhs[i, j] += ui * (1.0 - ui) - hist[i * m2 + j]
                cfield[i, j] = 1.0 - 2.0 * ui
        status, it, _ = pcg_solve(a0, cfield, rhs, du, h1i2, h2i2, tol, maxiter)
        total_it += it
        if status == PCG_INDEFINITE:
            return status, total_it
        for i in range(m1):
            for j in range(m2):
                u[i, j] += du[i, j]
                dU[n - 1, i * m2 + j] = du[i, j]
    return PCG_OK, total_it
