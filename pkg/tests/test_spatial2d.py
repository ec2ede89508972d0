import math

import numpy as np
import pytest

from subdiff.errors import IndefiniteOperatorError, SolverConvergenceError, ValidationError
from subdiff.spatial2d import (
    SpatialGrid2D,
    inner,
    laplacian,
    load_field_csv,
    mixed_second_diff,
    norm_l2,
    norm_max,
    save_field_csv,
    seminorm_h1,
    solve_shifted,
)

PI_GRID = dict(x_l=0.0, x_r=math.pi, y_l=0.0, y_r=math.pi)


def sin_grid(m):
    return SpatialGrid2D(m1=m, m2=m, **PI_GRID)


def embed(grid, interior):
    full = np.zeros(grid.shape)
    full[1:-1, 1:-1] = interior
    return full


def test_grid_validation():
    with pytest.raises(ValidationError):
        SpatialGrid2D(x_l=0.0, x_r=0.0, y_l=0.0, y_r=1.0, m1=4, m2=4)
    with pytest.raises(ValidationError):
        SpatialGrid2D(x_l=0.0, x_r=1.0, y_l=0.0, y_r=1.0, m1=1, m2=4)


def test_laplacian_annihilates_constants():
    grid = sin_grid(8)
    v = np.full(grid.shape, 2.5)
    np.testing.assert_array_equal(laplacian(grid, v), np.zeros(grid.interior_shape))


def test_laplacian_exact_for_quadratic():
    # v = x (pi - x) has exact Laplacian -2, reproduced by central differences
    grid = sin_grid(10)
    X, _ = grid.meshgrid()
    v = X * (math.pi - X)
    np.testing.assert_allclose(laplacian(grid, v), -2.0, rtol=1e-12)


def test_laplacian_eigenfunction_identity():
    # sin x sin y is a discrete eigenfunction with factor c1 + c2
    for m in (16, 32, 64):
        grid = sin_grid(m)
        v = grid.sample(lambda x, y: np.sin(x) * np.sin(y))
        c = (2.0 - 2.0 * math.cos(grid.h1)) / grid.h1 ** 2
        lam = 2.0 * c
        np.testing.assert_allclose(laplacian(grid, v), -lam * v[1:-1, 1:-1],
                                   rtol=1e-11, atol=1e-13)
        # second-order approach of the eigenvalue factor to 2
        assert lam == pytest.approx(2.0, abs=0.4 * grid.h1 ** 2)


def test_laplacian_second_order_consistency():
    errs = []
    for m in (16, 32, 64):
        grid = sin_grid(m)
        v = grid.sample(lambda x, y: np.sin(x) * np.sin(y))
        err = np.max(np.abs(laplacian(grid, v) + 2.0 * v[1:-1, 1:-1]))
        errs.append(err)
    rates = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    for r in rates:
        assert r == pytest.approx(2.0, abs=0.05)


def test_norms_zero_field():
    grid = sin_grid(8)
    z = np.zeros(grid.shape)
    assert norm_l2(grid, z) == 0.0
    assert seminorm_h1(grid, z) == 0.0
    assert norm_max(grid, z) == 0.0


def test_norm_of_indicator():
    grid = SpatialGrid2D(x_l=0.0, x_r=1.0, y_l=0.0, y_r=1.0, m1=9, m2=7)
    v = np.zeros(grid.shape)
    v[1:-1, 1:-1] = 1.0
    expected = grid.h1 * grid.h2 * (grid.m1 - 1) * (grid.m2 - 1)
    assert norm_l2(grid, v) ** 2 == pytest.approx(expected, rel=1e-13)


def test_norm_sine_riemann_sum():
    # sum of sin^2 over the uniform grid is exact: ||v||^2 = pi^2 / 4
    grid = sin_grid(64)
    v = grid.sample(lambda x, y: np.sin(x) * np.sin(y))
    assert norm_l2(grid, v) ** 2 == pytest.approx(math.pi ** 2 / 4.0, rel=1e-12)


def test_seminorm_h1_sine():
    # ||grad_h v||^2 -> int |grad v|^2 = pi^2 / 2, with O(h^2) defect
    vals = []
    for m in (32, 64):
        grid = sin_grid(m)
        v = grid.sample(lambda x, y: np.sin(x) * np.sin(y))
        vals.append(seminorm_h1(grid, v) ** 2)
    assert vals[1] == pytest.approx(math.pi ** 2 / 2.0, rel=5e-3)
    assert abs(vals[1] - math.pi ** 2 / 2.0) < abs(vals[0] - math.pi ** 2 / 2.0)


def test_laplacian_symmetric_negative():
    rng = np.random.default_rng(2)
    grid = sin_grid(12)
    v = embed(grid, rng.standard_normal(grid.interior_shape))
    w = embed(grid, rng.standard_normal(grid.interior_shape))
    lv = embed(grid, laplacian(grid, v))
    lw = embed(grid, laplacian(grid, w))
    s1 = inner(grid, lv, w)
    s2 = inner(grid, v, lw)
    assert s1 == pytest.approx(s2, rel=1e-13)
    assert inner(grid, lv, v) <= 0.0


def test_mixed_second_diff_quadratic():
    grid = SpatialGrid2D(x_l=0.0, x_r=1.0, y_l=0.0, y_r=1.0, m1=8, m2=8)
    X, Y = grid.meshgrid()
    np.testing.assert_allclose(mixed_second_diff(grid, X * Y), 1.0, rtol=1e-12)


# ------------------------------------------------------------- solves


def test_solve_zero_rhs_is_exact_zero():
    grid = sin_grid(16)
    c = np.zeros(grid.shape)
    out = solve_shifted(grid, 2.0, c, np.zeros(grid.shape))
    np.testing.assert_array_equal(out, np.zeros(grid.shape))


def test_solve_recovers_eigenfunction():
    grid = sin_grid(32)
    v = grid.sample(lambda x, y: np.sin(x) * np.sin(y))
    c1 = (2.0 - 2.0 * math.cos(grid.h1)) / grid.h1 ** 2
    a0 = 3.0
    rhs = (a0 + 2.0 * c1) * v
    rhs[0, :] = rhs[-1, :] = rhs[:, 0] = rhs[:, -1] = 0.0
    got = solve_shifted(grid, a0, np.zeros(grid.shape), rhs)
    np.testing.assert_allclose(got[1:-1, 1:-1], v[1:-1, 1:-1], atol=1e-10)


def test_solve_residual_contract_random():
    rng = np.random.default_rng(9)
    grid = sin_grid(16)
    c = embed(grid, rng.uniform(-1.0, 1.0, grid.interior_shape))
    rhs = embed(grid, rng.standard_normal(grid.interior_shape))
    a0 = 2.5
    w = solve_shifted(grid, a0, c, rhs)
    # residual check by direct operator application
    res = a0 * w[1:-1, 1:-1] - laplacian(grid, w) - c[1:-1, 1:-1] * w[1:-1, 1:-1]
    res -= rhs[1:-1, 1:-1]
    rel = np.linalg.norm(res) / np.linalg.norm(rhs[1:-1, 1:-1])
    assert rel <= 1e-11
    # boundary stays exactly zero
    assert np.all(w[0, :] == 0) and np.all(w[:, -1] == 0)


def test_solve_warm_start_consistent():
    rng = np.random.default_rng(29)
    grid = sin_grid(12)
    c = embed(grid, rng.uniform(-0.5, 0.5, grid.interior_shape))
    rhs = embed(grid, rng.standard_normal(grid.interior_shape))
    cold = solve_shifted(grid, 2.0, c, rhs)
    warm = solve_shifted(grid, 2.0, c, rhs, x0=cold + 1e-3)
    np.testing.assert_allclose(warm, cold, atol=1e-9)


def test_solve_indefinite_shift_rejected():
    grid = sin_grid(8)
    c = np.full(grid.shape, 5.0)
    with pytest.raises(IndefiniteOperatorError):
        solve_shifted(grid, 4.0, c, np.ones(grid.shape))


def test_solve_iteration_cap():
    rng = np.random.default_rng(4)
    grid = sin_grid(16)
    rhs = embed(grid, rng.standard_normal(grid.interior_shape))
    with pytest.raises(SolverConvergenceError) as exc:
        solve_shifted(grid, 2.0, np.zeros(grid.shape), rhs, tol=1e-30)
    assert exc.value.residual > 0


def test_field_csv_roundtrip(tmp_path):
    grid = sin_grid(6)
    rng = np.random.default_rng(1)
    v = rng.standard_normal(grid.shape)
    path = tmp_path / "field.csv"
    save_field_csv(grid, v, path)
    back = load_field_csv(grid, path)
    np.testing.assert_array_equal(back, v)
