import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyreach import thermal
from hyreach.setalg import ConstrainedZonotope, EmptySetError, Zonotope, sample_points
from hyreach.thermal import ThermalParams

P = ThermalParams()


def test_params_validation():
    with pytest.raises(ValueError):
        ThermalParams(epsilon=1.5)
    with pytest.raises(ValueError):
        ThermalParams(Qdot_max=0.0)


def test_heat_rate_values():
    assert thermal.heat_rate(50e3, 0.0) == 0.0
    # C * sqrt(1.225 * exp(-80000 / 7500)) * 7800 ** 3.05
    assert thermal.heat_rate(80e3, 7800.0) == pytest.approx(4.69e6, rel=2e-3)
    ratio = thermal.heat_rate(60e3, 6000.0) / thermal.heat_rate(60e3, 3000.0)
    assert ratio == pytest.approx(2**3.05, rel=1e-13)


@settings(max_examples=100)
@given(st.floats(0, 1.2e5), st.floats(100, 9000), st.floats(1, 1e4), st.floats(1, 500))
def test_heat_rate_monotone(h, v, dh, dv):
    q = thermal.heat_rate(h, v)
    assert thermal.heat_rate(h + dh, v) < q < thermal.heat_rate(h, v + dv)
    gh, gv = thermal.heat_rate_gradient(h, v)
    assert gh < 0 < gv


def test_gradient_matches_differences():
    h, v = 70e3, 7000.0
    gh, gv = thermal.heat_rate_gradient(h, v)
    assert gh == pytest.approx((thermal.heat_rate(h + 1, v) - thermal.heat_rate(h - 1, v)) / 2, rel=1e-7)
    assert gv == pytest.approx((thermal.heat_rate(h, v + 0.01) - thermal.heat_rate(h, v - 0.01)) / 0.02, rel=1e-7)


# -- temperature ---------------------------------------------------------------------


def test_temperature_values():
    assert thermal.surface_temperature(0.0) == 0.0
    T = thermal.surface_temperature(4.0e6)
    assert T == pytest.approx(3064.4, abs=0.5)
    assert thermal.surface_temperature_celsius(4.0e6) == pytest.approx(2791.3, abs=0.5)
    assert thermal.surface_temperature(16 * 3e5) == pytest.approx(2 * thermal.surface_temperature(3e5), rel=1e-14)
    with pytest.raises(ValueError):
        thermal.surface_temperature(-1.0)


@settings(max_examples=100)
@given(st.floats(1.0, 5000.0))
def test_temperature_inverts_stefan_boltzmann(T):
    q = P.sigma * P.epsilon * T**4
    assert thermal.surface_temperature(q) == pytest.approx(T, rel=1e-12)


# -- heat load -------------------------------------------------------------------------


def test_constant_rate_load():
    t = np.linspace(0, 10, 11)
    h = np.full(11, 60e3)
    v = np.full(11, 5000.0)
    prof = thermal.heat_load(t, h, v)
    assert prof.load[-1] == pytest.approx(10 * thermal.heat_rate(60e3, 5000.0), rel=1e-14)
    assert prof.peak_rate == pytest.approx(thermal.heat_rate(60e3, 5000.0))


def test_zero_speed_load():
    prof = thermal.heat_load([0.0, 1.0, 2.0], [1e4] * 3, [0.0] * 3)
    assert prof.load[-1] == 0.0


def test_load_errors():
    with pytest.raises(ValueError):
        thermal.heat_load([0.0], [1e4], [100.0])
    with pytest.raises(ValueError):
        thermal.heat_load([0.0, 0.0], [1e4, 1e4], [100.0, 100.0])


def test_trapezoid_is_second_order():
    def load(n):
        t = np.linspace(0, 100, n + 1)
        return thermal.heat_load(t, 80e3 - 200 * t, 7800 - 5 * t).load[-1]

    exact = load(6400)
    e1, e2 = abs(load(50) - exact), abs(load(100) - exact)
    assert e1 / e2 == pytest.approx(4.0, rel=0.05)


def test_load_is_additive_and_nondecreasing():
    t = np.linspace(0, 20, 41)
    h, v = 75e3 - 100 * t, 7500 - 10 * t
    whole = thermal.heat_load(t, h, v)
    first = thermal.heat_load(t[:21], h[:21], v[:21])
    second = thermal.heat_load(t[20:], h[20:], v[20:])
    assert whole.load[-1] == pytest.approx(first.load[-1] + second.load[-1], rel=1e-14)
    assert np.all(np.diff(whole.load) >= 0)


# -- halfspace -----------------------------------------------------------------------------


def test_halfspace_through_anchor_on_curve():
    v0 = 7000.0
    h0 = float(thermal.limit_altitude(v0))
    hs = thermal.heat_limit_halfspace((h0, v0))
    x = np.array([h0, v0, 0, 0, 0, 0])
    assert hs.normal @ x - hs.offset == pytest.approx(0.0, abs=1e-9 * abs(hs.offset))
    assert np.all(hs.normal[2:] == 0)


def test_halfspace_orientation():
    v0 = 7000.0
    h0 = float(thermal.limit_altitude(v0))
    hs = thermal.heat_limit_halfspace((h0, v0))
    assert hs.contains(np.array([h0 + 100, v0, 0, 0, 0, 0]))
    assert not hs.contains(np.array([h0 - 100, v0, 0, 0, 0, 0]))


def test_halfspace_far_from_limit_is_nonbinding():
    v0 = 5000.0
    h0 = float(thermal.limit_altitude(v0, ThermalParams(Qdot_max=P.Qdot_max / 100)))
    hs = thermal.heat_limit_halfspace((h0, v0))
    box = Zonotope.from_box([h0 - 500, v0 - 50, 0, 0, 0, 0], [h0 + 500, v0 + 50, 0, 0, 0, 0])
    pts = sample_points(box, 1000, np.random.default_rng(0))
    assert np.all(pts @ hs.normal <= hs.offset)


def test_halfspace_rejects_zero_speed():
    with pytest.raises(ValueError):
        thermal.heat_limit_halfspace((7e4, 0.0))


@pytest.mark.parametrize("anchor", [(71932.0, 7600.0), (77433.0, 7000.0), (60000.0, 5000.0)])
def test_halfspace_audit(anchor):
    hs = thermal.heat_limit_halfspace(anchor)
    ok, worst, n = thermal.audit_halfspace(hs, anchor, n_samples=10_000)
    assert ok, worst


def test_audit_flags_a_bad_halfspace():
    anchor = (77433.0, 7000.0)
    hs = thermal.heat_limit_halfspace(anchor, ThermalParams(Qdot_max=2 * P.Qdot_max))
    ok, worst, n = thermal.audit_halfspace(hs, anchor)
    assert not ok and worst > 1.05 and n > 0


# -- set bounds and the limit curve ----------------------------------------------------------


def test_max_rate_over_point_and_box():
    x = np.array([70e3, 7000.0, 0, 0, 0, 0])
    assert thermal.max_heat_rate_over_set(Zonotope.point(x)) == pytest.approx(thermal.heat_rate(70e3, 7000.0))
    box = Zonotope.from_box(x - [1000, 100, 0, 0, 0, 0], x + [1000, 100, 0, 0, 0, 0])
    bound = thermal.max_heat_rate_over_set(box)
    assert bound == pytest.approx(thermal.heat_rate(69e3, 7100.0))
    pts = sample_points(box, 10_000, np.random.default_rng(1))
    assert np.all(thermal.heat_rate(pts[:, 0], pts[:, 1]) <= bound)
    bigger = Zonotope.from_box(x - [2000, 150, 0, 0, 0, 0], x + [2000, 150, 0, 0, 0, 0])
    assert thermal.max_heat_rate_over_set(bigger) >= bound


def test_max_rate_over_empty_set():
    empty = ConstrainedZonotope(np.zeros(6), np.eye(6), [np.eye(6)[0]], [2.0])
    with pytest.raises(EmptySetError):
        thermal.max_heat_rate_over_set(empty)


def test_limit_curve_is_on_limit():
    curve = thermal.limit_curve(5000.0, 8000.0, 20)
    q = thermal.heat_rate(curve[:, 1], curve[:, 0])
    np.testing.assert_allclose(q, P.Qdot_max, rtol=1e-12)
    assert np.all(np.diff(curve[:, 1]) > 0)


def test_first_crossing():
    t = np.arange(5.0)
    v = np.full(5, 7000.0)
    h0 = float(thermal.limit_altitude(7000.0))
    h = h0 + np.array([300.0, 100.0, -100.0, -300.0, 0.0])
    assert thermal.first_crossing_time(t, h, v) == 2.0
    assert thermal.first_crossing_time(t, h + 1e4, v) is None
