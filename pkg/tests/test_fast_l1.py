import math

import numpy as np
import pytest

from subdiff.caputo import (
    FastHistory,
    complementary_identity_residual,
    complementary_kernel,
    consistency_rate_scan,
    discrete_kernel_A,
    discrete_kernel_rows,
    fast_history_update,
    fast_l1_apply,
    l1_apply_direct,
    l1_coefficient_table,
    local_weight_b,
    omega,
    soe_build,
)
from subdiff.errors import ValidationError
from subdiff.timemesh import GradedSpec, TimeMesh, build_graded


def random_mesh(rng, n_steps, scale=1.0):
    tau = scale * rng.uniform(0.2, 2.0, size=n_steps)
    return TimeMesh(points=np.concatenate([[0.0], np.cumsum(tau)]))


@pytest.fixture(scope="module")
def soe_unit():
    return soe_build(0.5, 1e-12, 1e-3, 70.0)


# ------------------------------------------------------------- history


def test_history_zero_increment_stays_zero(soe_unit):
    hist = FastHistory.zeros(soe_unit, ndof=3)
    fast_history_update(hist, 0.1, np.zeros(3))
    assert hist.level == 1
    assert np.all(hist.H == 0.0)


def test_history_first_update_is_local_weight(soe_unit):
    hist = FastHistory.zeros(soe_unit, ndof=2)
    fast_history_update(hist, 0.25, np.array([2.0, -1.0]))
    b = local_weight_b(np.asarray(soe_unit.nodes, dtype=np.float64), 0.25)
    np.testing.assert_allclose(hist.H[0], 2.0 * b, rtol=1e-14)
    np.testing.assert_allclose(hist.H[1], -1.0 * b, rtol=1e-14)


@pytest.mark.parametrize("signed", [False, True])
def test_history_recurrence_matches_unrolled_sum(soe_unit, signed):
    # H_l(t_k) = sum_j exp(-theta_l (t_k - t_j)) b^(j,l) dv_j, k <= 100.
    # With one-signed increments the agreement is relative to the value; with
    # random signs the sum cancels, so relative to the term magnitudes.
    rng = np.random.default_rng(5)
    mesh = random_mesh(rng, 100, scale=0.5)
    dv = rng.standard_normal(100) if signed else rng.uniform(0.1, 1.0, 100)
    theta = np.asarray(soe_unit.nodes, dtype=np.float64)
    hist = FastHistory.zeros(soe_unit, ndof=1)
    for k in range(1, 101):
        fast_history_update(hist, float(mesh.tau[k - 1]), dv[k - 1], level=k)
        t_k = mesh.points[k]
        unrolled = np.zeros_like(theta)
        magnitude = np.zeros_like(theta)
        for j in range(1, k + 1):
            term = (
                np.exp(-theta * (t_k - mesh.points[j]))
                * local_weight_b(theta, float(mesh.tau[j - 1]))
                * dv[j - 1]
            )
            unrolled += term
            magnitude += np.abs(term)
        scale = magnitude if signed else np.maximum(np.abs(unrolled), 1e-300)
        assert np.max(np.abs(hist.H[0] - unrolled) / np.maximum(scale, 1e-300)) < 1e-14


def test_history_level_mismatch(soe_unit):
    hist = FastHistory.zeros(soe_unit, ndof=1)
    with pytest.raises(ValidationError):
        fast_history_update(hist, 0.1, np.array([1.0]), level=2)


def test_history_shape_mismatch(soe_unit):
    hist = FastHistory.zeros(soe_unit, ndof=2)
    with pytest.raises(ValidationError):
        fast_history_update(hist, 0.1, np.zeros(3))


# -------------------------------------------------------- fast L1 apply


def test_fast_apply_first_level_is_local_term(soe_unit):
    mesh = build_graded(GradedSpec(T=1.0, N=4, gamma=1.0))
    hist = FastHistory.zeros(soe_unit, ndof=1)
    alpha = soe_unit.alpha
    a0 = 0.25 ** -alpha / math.gamma(2.0 - alpha)
    assert fast_l1_apply(hist, mesh, 1, 3.0) == pytest.approx(3.0 * a0, rel=1e-14)


def test_fast_apply_level_mismatch(soe_unit):
    mesh = build_graded(GradedSpec(T=1.0, N=4, gamma=1.0))
    hist = FastHistory.zeros(soe_unit, ndof=1)
    with pytest.raises(ValidationError):
        fast_l1_apply(hist, mesh, 2, 1.0)


def test_fast_matches_direct_for_linear_function():
    mesh = build_graded(GradedSpec(T=1.0, N=32, gamma=2.0))
    soe = soe_build(0.4, 1e-10, mesh.tau_min, 1.0)
    values = mesh.points.copy()
    hist = FastHistory.zeros(soe, ndof=1)
    for n in range(1, 33):
        dv = values[n] - values[n - 1]
        fast = fast_l1_apply(hist, mesh, n, dv)
        direct = l1_apply_direct(mesh, 0.4, values[: n + 1], n)
        assert abs(fast - direct) <= 1e-8
        fast_history_update(hist, float(mesh.tau[n - 1]), dv)


def test_fast_direct_equivalence_random():
    # |fast - direct| <= eps * sum |dv| for random sequences on random meshes
    rng = np.random.default_rng(17)
    for trial in range(5):
        mesh = random_mesh(rng, 64, scale=0.05)
        soe = soe_build(0.6, 1e-12, mesh.tau_min, mesh.final_time)
        values = np.concatenate([[0.0], np.cumsum(rng.standard_normal(64))])
        hist = FastHistory.zeros(soe, ndof=1)
        for n in range(1, 65):
            dv = values[n] - values[n - 1]
            fast = fast_l1_apply(hist, mesh, n, dv)
            direct = l1_apply_direct(mesh, 0.6, values[: n + 1], n)
            budget = 1e-12 * np.sum(np.abs(np.diff(values[: n + 1]))) + 1e-15
            assert abs(fast - direct) <= budget
            fast_history_update(hist, float(mesh.tau[n - 1]), dv)


# ---------------------------------------------------- discrete kernel A


def test_kernel_A_first_level_equals_a(soe_unit):
    mesh = build_graded(GradedSpec(T=1.0, N=8, gamma=1.5))
    soe = soe_build(0.5, 1e-10, mesh.tau_min, 1.0)
    A = discrete_kernel_A(mesh, soe, 1)
    assert A.shape == (1,)
    a0 = mesh.tau[0] ** -0.5 / math.gamma(1.5)
    assert A[0] == pytest.approx(a0, rel=1e-14)


def _lemma_eps_threshold(alpha, T):
    return min(omega(1.0 - alpha, T) / 3.0, alpha * omega(2.0 - alpha, 1.0))


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_kernel_A_close_to_a_and_bounded_below(alpha):
    mesh = build_graded(GradedSpec(T=1.0, N=60, gamma=2.0))
    eps = min(1e-10, _lemma_eps_threshold(alpha, 1.0))
    soe = soe_build(alpha, eps, mesh.tau_min, 1.0)
    table = l1_coefficient_table(mesh, alpha)
    for n in (2, 17, 60):
        A = discrete_kernel_A(mesh, soe, n)
        a = table[n - 1, :n][::-1]  # subscript order
        assert A[0] == pytest.approx(a[0], rel=1e-14)
        assert np.max(np.abs(A[1:] - a[1:])) <= eps
        assert np.all(np.diff(A) < 0)          # monotone decreasing
        assert np.all(A[1:] >= (2.0 / 3.0) * a[1:])


# ------------------------------------------------- complementary kernel


def test_complementary_base_case():
    mesh = build_graded(GradedSpec(T=1.0, N=4, gamma=2.0))
    alpha = 0.4
    soe = soe_build(alpha, 1e-10, mesh.tau_min, 1.0)
    P = complementary_kernel(discrete_kernel_rows(mesh, soe, 1))
    tau1 = mesh.tau[0]
    assert P.values[0] == pytest.approx(math.gamma(2.0 - alpha) * tau1 ** alpha, rel=1e-13)


def test_complementary_identity_and_bound():
    mesh = build_graded(GradedSpec(T=1.0, N=48, gamma=2.0))
    alpha = 0.5
    soe = soe_build(alpha, 1e-10, mesh.tau_min, 1.0)
    rows = discrete_kernel_rows(mesh, soe, 48)
    for n in (1, 7, 48):
        P = complementary_kernel(rows[:n])
        assert np.all(P.values >= 0.0)
        assert complementary_identity_residual(P, rows[:n]) <= 1e-12
        assert P.total() <= 1.5 * omega(1.0 + alpha, mesh.points[n])


def test_complementary_rejects_non_monotone():
    rows = [np.array([1.0]), np.array([0.9, 1.1])]
    with pytest.raises(ValidationError):
        complementary_kernel(rows)


def test_complementary_tolerates_roundoff_wiggle():
    base = np.array([2.0, 1.0])
    rows = [np.array([3.0]), np.array([base[0], base[0] * (1.0 + 5e-16)])]
    complementary_kernel(rows)  # rise below the round-off slack is accepted


# -------------------------------------------------- consistency scan


def test_consistency_scan_smooth_case():
    scan = consistency_rate_scan(0.5, 1.5, 1.0, [24, 48, 96])
    assert scan.expected_rate == pytest.approx(1.5)
    assert scan.fitted_rate_weighted == pytest.approx(1.5, abs=0.25)
    assert all(e > 0 for e in scan.err_weighted)
    orders = scan.orders_weighted()
    assert len(orders) == 2
