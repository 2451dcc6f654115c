import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyreach import dynamics as dyn
from hyreach.dynamics import DomainError, Environment, VehicleParams

DEG = math.pi / 180
X_HEAT = np.array([80000.0, 7800.0, -0.1 * DEG, 0.0, 90 * DEG, 0.0])
U_HEAT = np.array([22.5 * DEG, -60 * DEG])


def transcribed_rates(x, u, p=VehicleParams(), e=Environment()):
    """Second, independent transcription of the equations of motion."""
    h, v, gam, th, psi, _ = x
    alpha_deg, beta = u[0] / DEG, u[1]
    rho = e.rho0 * math.exp(-h / e.hr)
    r = e.Re + h
    g = e.G / r**2
    L = 0.5 * (p.a0 + p.a1 * alpha_deg) * p.S * rho * v**2
    D = 0.5 * (p.b0 + p.b1 * alpha_deg + p.b2 * alpha_deg**2) * p.S * rho * v**2
    return np.array([
        v * math.sin(gam),
        -D / p.m - g * math.sin(gam),
        L / (p.m * v) * math.cos(beta) + math.cos(gam) * (v / r - g / v),
        v / r * math.cos(gam) * math.sin(psi),
        L / (p.m * v) * math.sin(beta) / math.cos(gam) - v / r * math.cos(gam) * math.cos(psi) * math.tan(th),
        v / r * math.cos(gam) * math.cos(psi) / math.cos(th),
    ])


def random_points(rng, n):
    lo = np.array([30e3, 3000, -0.3, -0.5, 0.0, -1.0, 10 * DEG, -80 * DEG])
    hi = np.array([90e3, 8000, 0.1, 0.5, 3.0, 1.0, 35 * DEG, 80 * DEG])
    return rng.uniform(lo, hi, size=(n, 8))


def central_differences(z, step=1e-6):
    J = np.empty((6, 8))
    for j in range(8):
        dz = step * max(1.0, abs(z[j]))
        zp, zm = z.copy(), z.copy()
        zp[j] += dz
        zm[j] -= dz
        J[:, j] = (dyn.eom(zp[:6], zp[6:]) - dyn.eom(zm[:6], zm[6:])) / (2 * dz)
    return J


# -- environment and aerodynamics ---------------------------------------------


def test_density_values():
    assert dyn.density(0.0) == 1.225
    assert dyn.density(7500.0) == pytest.approx(1.225 * math.exp(-1), rel=1e-12)
    assert dyn.density(80000.0) == pytest.approx(2.8554e-5, rel=1e-4)


def test_gravity_values():
    assert dyn.gravity(0.0) == pytest.approx(9.798, abs=1e-3)
    assert dyn.gravity(6.378e6) == pytest.approx(dyn.gravity(0.0) / 4, rel=1e-14)
    assert dyn.gravity(80000.0) == pytest.approx(9.557, abs=1e-3)
    with pytest.raises(DomainError):
        dyn.gravity(-7e6)


@settings(max_examples=50)
@given(st.floats(-5e3, 2e5), st.floats(1.0, 1e4))
def test_density_and_gravity_decrease(h, dh):
    assert dyn.density(h + dh) < dyn.density(h)
    assert dyn.gravity(h + dh) < dyn.gravity(h)
    assert dyn.density(h) > 0 and dyn.gravity(h) > 0


def test_coefficients_use_degrees():
    p = VehicleParams()
    assert p.lift_coefficient(15 * DEG) == pytest.approx(0.23162, abs=1e-12)
    # 0.07854 - 0.0061592 * 15 + 0.000621408 * 225
    assert p.drag_coefficient(15 * DEG) == pytest.approx(0.1259688, abs=1e-12)


def test_zero_speed_gives_no_forces():
    L, D = dyn.aero_forces(50e3, 0.0, 20 * DEG)
    assert L == 0.0 and D == 0.0


def test_parameter_validation():
    with pytest.raises(ValueError):
        VehicleParams(m=0.0)
    with pytest.raises(ValueError):
        Environment(hr=-1.0)


# -- equations of motion ----------------------------------------------------------


def test_level_flight_holds_altitude():
    x = X_HEAT.copy()
    x[2] = 0.0
    assert dyn.eom(x, U_HEAT)[0] == 0.0


def test_vertical_dive():
    x = np.array([50e3, 3000.0, -math.pi / 2, 0.1, 0.3, 0.0])
    f = dyn.eom(x, U_HEAT)
    _, D = dyn.aero_forces(x[0], x[1], U_HEAT[0])
    assert f[0] == pytest.approx(-3000.0, rel=1e-15)
    assert f[1] == pytest.approx(-D / 340.0 + dyn.gravity(x[0]), rel=1e-14)


def test_free_fall_without_aerodynamics():
    p = VehicleParams(a0=0, a1=0, b0=0, b1=0, b2=0)
    x = np.array([50e3, 3000.0, -math.pi / 2, 0.1, 0.3, 0.0])
    assert dyn.eom(x, U_HEAT, p)[1] == pytest.approx(dyn.gravity(x[0]), rel=1e-15)


def test_rates_match_transcription():
    np.testing.assert_allclose(dyn.eom(X_HEAT, U_HEAT), transcribed_rates(X_HEAT, U_HEAT), rtol=1e-10, atol=0)
    for z in random_points(np.random.default_rng(1), 50):
        np.testing.assert_allclose(dyn.eom(z[:6], z[6:]), transcribed_rates(z[:6], z[6:]), rtol=1e-10, atol=1e-14)


@settings(max_examples=40)
@given(st.floats(-3.0, 3.0))
def test_longitude_does_not_matter(phi):
    x = X_HEAT.copy()
    x[5] = phi
    np.testing.assert_array_equal(dyn.eom(x, U_HEAT), dyn.eom(X_HEAT, U_HEAT))


def test_singular_points_rejected():
    x = X_HEAT.copy()
    x[1] = 0.5
    with pytest.raises(DomainError):
        dyn.eom(x, U_HEAT)
    x = X_HEAT.copy()
    x[3] = math.pi / 2
    with pytest.raises(DomainError):
        dyn.eom(x, U_HEAT)


# -- integrators ------------------------------------------------------------------


def test_euler_step():
    x = X_HEAT.copy()
    x[2] = 0.0
    nxt = dyn.step_euler(x, U_HEAT, 0.1)
    assert nxt[0] == x[0]
    np.testing.assert_allclose(nxt, x + 0.1 * dyn.eom(x, U_HEAT), rtol=1e-15)
    with pytest.raises(ValueError):
        dyn.step_euler(x, U_HEAT, 0.0)


def test_euler_local_error_is_second_order():
    x0, u = X_HEAT, U_HEAT
    errs = []
    for Ts in (0.4, 0.2):
        full = dyn.step_euler(x0, u, Ts)
        half = dyn.step_euler(dyn.step_euler(x0, u, Ts / 2), u, Ts / 2)
        errs.append(abs(full[1] - half[1]))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_rk4_constant_dynamics():
    t, X = dyn.integrate_rk4(np.ones(6), lambda t: [0.0, 0.0], 2.0, 0.5, rates=lambda x, u: np.zeros(6))
    assert np.all(X == 1.0) and len(t) == 5


def test_rk4_fourth_order():
    ctrl = dyn.PiecewiseControl(40.0, np.array([U_HEAT, [25 * DEG, -30 * DEG]]))
    ref = dyn.integrate_rk4(X_HEAT, ctrl, 80.0, 0.25)[1][-1]
    e1 = np.abs(dyn.integrate_rk4(X_HEAT, ctrl, 80.0, 8.0)[1][-1] - ref)[2]
    e2 = np.abs(dyn.integrate_rk4(X_HEAT, ctrl, 80.0, 4.0)[1][-1] - ref)[2]
    assert 12 < e1 / e2 < 20


def test_rk4_step_must_divide():
    with pytest.raises(ValueError):
        dyn.integrate_rk4(X_HEAT, lambda t: U_HEAT, 1.0, 0.3)
    with pytest.raises(ValueError):
        dyn.integrate_rk4(X_HEAT, dyn.PiecewiseControl(0.25, np.array([U_HEAT])), 1.0, 0.1)


def test_rk4_regression_fixture():
    x0 = [67000.0, 6096.0, -0.1 * DEG, 0.0, 90 * DEG, 0.0]
    _, X = dyn.integrate_rk4(x0, lambda t: [22.5 * DEG, -55 * DEG], 120.0, 0.1)
    pinned = [4.7874040225954144e04, 5.8369537188256636e03, -3.1653894375768432e-02,
              1.1223030233467131e-01, 1.5001434027284375e00, 2.2118867806901919e-03]
    np.testing.assert_allclose(X[-1], pinned, rtol=1e-9)


# -- derivatives -------------------------------------------------------------------


def test_jacobian_exact_entries():
    A, B = dyn.jacobian(np.concatenate([X_HEAT, U_HEAT]))
    assert A.shape == (6, 6) and B.shape == (6, 2)
    assert A[0, 1] == math.sin(X_HEAT[2])
    assert A[0, 0] == 0.0
    assert not np.any(A[:, 5])


def test_jacobian_matches_finite_differences():
    for z in random_points(np.random.default_rng(2), 20):
        A, B = dyn.jacobian(z)
        J = np.hstack([A, B])
        fd = central_differences(z)
        scale = np.maximum(np.abs(J), 1e-6 * np.max(np.abs(J), axis=1, keepdims=True))
        assert np.max(np.abs(J - fd) / scale) < 1e-5


def test_hessian_bound_on_hdot():
    lo = np.concatenate([X_HEAT, U_HEAT]) - 0.0
    hi = lo.copy()
    lo[2], hi[2] = -0.1, 0.1
    H = dyn.hessian_abs_max(0, lo, hi)
    assert 1.0 <= H[1, 2] <= 1.0 + 1e-12
    # h does not enter hdot; outward rounding may leave a denormal
    assert H[0, 0] < 1e-300


def test_hessian_bound_dominates_samples():
    rng = np.random.default_rng(3)
    for centre in random_points(rng, 10):
        rad = np.array([500, 50, 0.01, 0.01, 0.02, 0.01, 0.01, 0.02])
        lo, hi = centre - rad, centre + rad
        bounds = [dyn.hessian_abs_max(i, lo, hi) for i in range(6)]
        for z in rng.uniform(lo, hi, size=(100, 8)):
            Hs = dyn.point_hessians(z)
            for i in range(6):
                assert np.all(np.abs(Hs[i]) <= bounds[i] * (1 + 1e-12) + 1e-300)


def test_point_hessian_matches_jacobian_differences():
    z = np.concatenate([X_HEAT, U_HEAT])
    H = dyn.point_hessians(z)
    for j in range(8):
        dz = 1e-5 * max(1.0, abs(z[j]))
        zp, zm = z.copy(), z.copy()
        zp[j] += dz
        zm[j] -= dz
        col = (np.hstack(dyn.jacobian(zp)) - np.hstack(dyn.jacobian(zm))) / (2 * dz)
        np.testing.assert_allclose(H[:, :, j], col, rtol=1e-5, atol=1e-9 * np.max(np.abs(H)))


def test_hessian_rejects_singular_range():
    lo = np.concatenate([X_HEAT, U_HEAT])
    hi = lo.copy()
    lo[3], hi[3] = 1.5, 1.6
    with pytest.raises(DomainError):
        dyn.hessian_abs_max(0, lo, hi)
