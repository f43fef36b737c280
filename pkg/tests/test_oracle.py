"""Geodesic-equation oracle arm: Christoffel symbols, RK4, shooting, residuals.

The unit sphere supplies closed-form references: g = diag(1, sin^2 t1), the
only nonzero standard symbols are G^1_22 = -sin t1 cos t1 and
G^2_12 = G^2_21 = cot t1, and equator segments are geodesics with energy
(arc length)^2 / 2.
"""

import numpy as np
import pytest

from ritzgeo.errors import DegenerateMetricError, ShootingError
from ritzgeo.metrics import identity_metric, sphere_metric
from ritzgeo.networks import Architecture
from ritzgeo.oracle import (
    christoffel,
    el_residual,
    metric_derivatives,
    rk4_integrate,
    shoot,
    standard_christoffel,
)
from ritzgeo.quadrature import QuadGrid
from ritzgeo.solver import TrainConfig, make_model, train


QUARTER = np.pi / 2


# ---------------------------------------------------------------------------
# Christoffel symbols


def test_metric_derivatives_sphere_closed_form():
    # only nonzero entry: d g_22 / d t1 = 2 sin t1 cos t1
    th = np.array([np.pi / 4, 0.3])
    dg = np.asarray(metric_derivatives(sphere_metric(), th))
    expect = np.zeros((2, 2, 2))
    expect[1, 1, 0] = 2 * np.sin(np.pi / 4) * np.cos(np.pi / 4)
    np.testing.assert_allclose(dg, expect, atol=1e-12)


def test_christoffel_sphere_hand_values():
    th = np.array([np.pi / 4, 0.3])
    g = christoffel(sphere_metric(), th).gamma
    # asymmetric convention: G_ijk = ginv_il (d g_jl / d t_k - 0.5 d g_jk / d t_l)
    assert g[0, 1, 1] == pytest.approx(-0.5, abs=1e-12)
    assert g[1, 1, 0] == pytest.approx(2.0, abs=1e-12)
    assert g[1, 0, 1] == pytest.approx(0.0, abs=1e-12)


def test_standard_christoffel_sphere_hand_values():
    th = np.array([np.pi / 4, 0.3])
    g = standard_christoffel(sphere_metric(), th).gamma
    assert g[0, 1, 1] == pytest.approx(-0.5, abs=1e-12)  # -sin cos at pi/4
    assert g[1, 1, 0] == pytest.approx(1.0, abs=1e-12)  # cot(pi/4)
    assert g[1, 0, 1] == pytest.approx(1.0, abs=1e-12)


def test_convention_equivalence_under_contraction(rng):
    # both conventions contract identically with v (x) v
    m = sphere_metric()
    worst = 0.0
    for _ in range(100):
        th = np.array([rng.uniform(0.2, np.pi - 0.2), rng.uniform(0, 2 * np.pi)])
        v = rng.standard_normal(2)
        a = christoffel(m, th).contract(v)
        b = standard_christoffel(m, th).contract(v)
        worst = max(worst, float(np.abs(a - b).max()))
    assert worst < 1e-10


def test_contract_is_quadratic_in_velocity():
    m = sphere_metric()
    th = np.array([0.8, 0.1])
    v = np.array([0.3, -0.9])
    c1 = christoffel(m, th).contract(v)
    c2 = christoffel(m, th).contract(2.0 * v)
    np.testing.assert_allclose(c2, 4.0 * c1, rtol=1e-13)


def test_flat_christoffel_vanishes():
    g = christoffel(identity_metric(2), np.array([0.4, 0.6])).gamma
    np.testing.assert_array_equal(g, np.zeros((2, 2, 2)))


def test_degenerate_metric_raises_at_pole():
    with pytest.raises(DegenerateMetricError):
        christoffel(sphere_metric(), np.array([0.0, 0.3]))


# ---------------------------------------------------------------------------
# RK4 integration


def test_rk4_flat_metric_is_exact_straight_line():
    traj = rk4_integrate(identity_metric(2), [0.2, -0.1], [1.0, 2.0], steps=100)
    np.testing.assert_allclose(traj.thetas[-1], [1.2, 1.9], atol=1e-13)
    np.testing.assert_allclose(traj.vels[-1], [1.0, 2.0], atol=1e-13)


def test_rk4_equator_geodesic():
    # equator: t1 = pi/2 is preserved exactly, t2 advances at unit rate
    traj = rk4_integrate(sphere_metric(), [QUARTER, 0.0], [0.0, 1.0], steps=1000)
    assert abs(traj.thetas[-1][0] - QUARTER) < 1e-10
    assert traj.thetas[-1][1] == pytest.approx(1.0, abs=1e-8)
    # constant-speed property of geodesics: g(v, v) is conserved
    m = sphere_metric()
    speeds = [v @ m.matrix(th) @ v for th, v in zip(traj.thetas, traj.vels)]
    assert np.ptp(speeds) < 1e-10


def test_trajectory_energy_equator():
    traj = rk4_integrate(sphere_metric(), [QUARTER, 0.0], [0.0, 1.0], steps=1000)
    assert traj.energy(sphere_metric()) == pytest.approx(0.5, abs=1e-10)


def test_rk4_tilted_great_circle_returns_to_sphere_oracle():
    # shoot along a meridian: from the equator toward the pole, t2 frozen
    traj = rk4_integrate(sphere_metric(), [QUARTER, 0.7], [-1.0, 0.0], steps=1000)
    assert traj.thetas[-1][0] == pytest.approx(QUARTER - 1.0, abs=1e-10)
    assert traj.thetas[-1][1] == pytest.approx(0.7, abs=1e-10)


# ---------------------------------------------------------------------------
# shooting


def test_shoot_flat_is_immediate():
    res = shoot(identity_metric(2), [0.0, 0.0], [1.0, 1.0])
    np.testing.assert_allclose(res.v0, [1.0, 1.0], atol=1e-12)
    assert res.miss < 1e-12
    assert res.iterations <= 2


def test_shoot_quarter_equator_energy():
    res = shoot(sphere_metric(), [QUARTER, 0.0], [QUARTER, QUARTER])
    assert res.miss < 1e-8
    # great-circle arc pi/2: energy (pi/2)^2 / 2
    assert res.energy(sphere_metric()) == pytest.approx(np.pi**2 / 8, rel=1e-6)
    # the solved initial velocity is the equator tangent
    np.testing.assert_allclose(res.v0, [0.0, QUARTER], atol=1e-6)


def test_shoot_off_equator_hits_target():
    target = np.array([1.1, 0.8])
    res = shoot(sphere_metric(), [QUARTER, 0.0], target)
    np.testing.assert_allclose(res.trajectory.thetas[-1], target, atol=1e-7)


def test_shoot_unreachable_tolerance_raises():
    with pytest.raises(ShootingError) as exc_info:
        shoot(sphere_metric(), [QUARTER, 0.0], [QUARTER, QUARTER],
              tol=1e-30, steps=100)
    err = exc_info.value
    assert err.miss < 1e-8  # best miss is reported even though tol was absurd
    assert err.iterations >= 1


# ---------------------------------------------------------------------------
# Euler-Lagrange residuals


def _zero_net_model(theta0, theta1):
    arch = Architecture(hidden_widths=(8, 8), output_dim=len(theta0))
    m = make_model(arch, theta0, theta1, seed=0)
    return m.replaced(np.zeros_like(m.params.values))


def test_residual_straight_line_flat_is_zero():
    m = _zero_net_model([0.0, 0.0], [1.0, 1.0])
    rep = el_residual(m, identity_metric(2))
    assert rep.rms < 1e-12
    assert rep.max_norm < 1e-12


def test_residual_equator_line_is_geodesic():
    # the straight chart line along the equator solves the geodesic equation
    m = _zero_net_model([QUARTER, 0.0], [QUARTER, QUARTER])
    rep = el_residual(m, sphere_metric())
    assert rep.rms < 1e-10


def test_residual_drops_after_training():
    theta0, theta1 = [0.6, 0.2], [1.3, 1.1]
    arch = Architecture(hidden_widths=(25, 25), output_dim=2)
    m = make_model(arch, theta0, theta1, seed=0)
    before = el_residual(m, sphere_metric()).rms
    result = train(m, sphere_metric(), TrainConfig(epochs=5000, seed=0))
    after = el_residual(result.model, sphere_metric()).rms
    assert after < before / 10.0


def test_residual_report_covers_interior_nodes():
    m = _zero_net_model([0.0, 0.0], [1.0, 1.0])
    rep = el_residual(m, identity_metric(2), grid=QuadGrid(100))
    assert rep.ts[0] > 0.0 and rep.ts[-1] < 1.0
    assert len(rep.ts) == 98
