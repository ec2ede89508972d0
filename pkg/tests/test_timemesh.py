import numpy as np
import pytest

from subdiff.errors import ValidationError
from subdiff.timemesh import (
    CompositeSpec,
    GradedSpec,
    TimeMesh,
    build_composite,
    build_graded,
    mesh_diagnostics,
)


def test_graded_uniform_case():
    mesh = build_graded(GradedSpec(T=1.0, N=4, gamma=1.0))
    np.testing.assert_allclose(mesh.points, [0.0, 0.25, 0.5, 0.75, 1.0], rtol=0, atol=0)


def test_graded_quadratic_case():
    mesh = build_graded(GradedSpec(T=1.0, N=4, gamma=2.0))
    np.testing.assert_allclose(
        mesh.points, [0.0, 1.0 / 16.0, 0.25, 9.0 / 16.0, 1.0], rtol=1e-15
    )


def test_graded_first_step_scaling():
    # tau_1 = T * N^-gamma for the graded family
    mesh = build_graded(GradedSpec(T=1.0, N=100, gamma=3.0))
    assert mesh.tau[0] == pytest.approx(1e-6, rel=1e-12)
    assert mesh.tau[0] == pytest.approx(1.0 * 100.0 ** -3.0, rel=1e-14)


@pytest.mark.parametrize(
    "kwargs",
    [dict(T=1.0, N=4, gamma=0.5), dict(T=1.0, N=0, gamma=2.0), dict(T=-1.0, N=4, gamma=2.0)],
)
def test_graded_spec_validation(kwargs):
    with pytest.raises(ValidationError):
        GradedSpec(**kwargs)


def test_composite_reference_case():
    spec = CompositeSpec(T=1.0, NT=100, gamma=2.0)
    assert spec.T0 == 0.5
    assert spec.N == 67
    mesh = build_composite(spec)
    assert mesh.points.size == 101
    assert mesh.points[67] == pytest.approx(0.5, rel=1e-15)
    assert mesh.points[-1] == 1.0
    tail = np.diff(mesh.points[67:])
    np.testing.assert_allclose(tail, 0.5 / 33.0, rtol=1e-12)
    assert tail[0] == pytest.approx(0.015151515151515152, rel=1e-12)


def test_composite_gamma_one_collapses_to_uniform():
    spec = CompositeSpec(T=1.0, NT=100, gamma=1.0)
    assert spec.T0 == 1.0
    assert spec.N == 100
    mesh = build_composite(spec)
    np.testing.assert_allclose(mesh.points, np.linspace(0, 1, 101), atol=1e-15)


def test_composite_long_horizon():
    spec = CompositeSpec(T=50.0, NT=1000, gamma=2.0)
    assert spec.T0 == 0.5
    assert spec.N == 20
    mesh = build_composite(spec)
    assert mesh.points.size == 1001
    assert mesh.points[-1] == 50.0


def test_composite_degenerate_tail_rejected():
    # T slightly above 1/gamma leaves a nonempty tail but no steps for it
    with pytest.raises(ValidationError):
        build_composite(CompositeSpec(T=1.01, NT=100, gamma=1.0))


@pytest.mark.parametrize("gamma", [1.0, 1.5, 2.0, 3.0, 4.0])
@pytest.mark.parametrize("T,NT", [(1.0, 100), (2.0, 64), (50.0, 1000)])
def test_composite_tail_step_dominates_graded(T, NT, gamma):
    mesh = build_composite(CompositeSpec(T=T, NT=NT, gamma=gamma))
    spec = CompositeSpec(T=T, NT=NT, gamma=gamma)
    if spec.T0 < T:
        N = spec.N
        tau = mesh.tau
        assert tau[N] >= tau[N - 1] * (1.0 - 1e-12)
    assert mesh.points[-1] == T


@pytest.mark.parametrize("gamma", [1.0, 2.0, 4.0, 6.0])
@pytest.mark.parametrize("N", [10, 100, 1000])
def test_graded_step_ratios_below_one(N, gamma):
    # steps are nondecreasing; closed-form points leave only ulp-level jitter
    mesh = build_graded(GradedSpec(T=1.0, N=N, gamma=gamma))
    slack = 4.0 * np.spacing(mesh.points[2:])
    assert np.all(np.diff(mesh.tau) >= -slack)


@pytest.mark.parametrize("gamma", [1.0, 2.0, 3.0])
def test_graded_point_ratio_bound(gamma):
    # t_k / t_{k-1} = (k/(k-1))^gamma <= 2^gamma for k >= 2
    mesh = build_graded(GradedSpec(T=1.0, N=50, gamma=gamma))
    diag = mesh_diagnostics(mesh, gamma)
    assert diag.C_ratio_estimate <= 2.0 ** gamma * (1 + 1e-12)


def test_diagnostics_uniform():
    mesh = build_graded(GradedSpec(T=1.0, N=16, gamma=1.0))
    diag = mesh_diagnostics(mesh, 1.0)
    assert diag.rho_max == pytest.approx(1.0, rel=1e-14)
    assert diag.C_g_estimate == pytest.approx(1.0, rel=1e-12)


def test_diagnostics_quadratic_ratio():
    mesh = build_graded(GradedSpec(T=1.0, N=10, gamma=2.0))
    diag = mesh_diagnostics(mesh, 2.0)
    # max_k (k/(k-1))^2 is attained at k = 2
    assert diag.C_ratio_estimate == pytest.approx(4.0, rel=1e-12)
    assert np.isfinite(diag.C_g_estimate)


def test_mesh_validation():
    with pytest.raises(ValidationError):
        TimeMesh(points=np.array([0.0, 0.5, 0.5, 1.0]))
    with pytest.raises(ValidationError):
        TimeMesh(points=np.array([0.1, 0.5, 1.0]))
    with pytest.raises(ValidationError):
        TimeMesh(points=np.array([0.0]))


def test_mesh_immutable():
    mesh = build_graded(GradedSpec(T=1.0, N=4, gamma=2.0))
    with pytest.raises(ValueError):
        mesh.points[0] = 1.0


def test_csv_roundtrip(tmp_path):
    mesh = build_graded(GradedSpec(T=2.0, N=37, gamma=2.7))
    path = tmp_path / "mesh.csv"
    mesh.to_csv(path)
    back = TimeMesh.from_csv(path)
    np.testing.assert_array_equal(back.points, mesh.points)
