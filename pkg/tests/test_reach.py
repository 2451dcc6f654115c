import math

import numpy as np
import pytest

from hyreach import setalg
from hyreach.dynamics import EntryModel
from hyreach.reach import (LinearizedStep, ReachConfig, enclosure, error_gain, error_set, lin_reach_step,
                           linearize_at, reach, choose_split_axis)
from hyreach.setalg import Halfspace, Zonotope

from models import LinearModel, QuadraticModel, SignedQuadraticModel

DEG = math.pi / 180
ENTRY_CENTER = np.array([71932.0, 7600.0, -0.1 * DEG, 0.0, 90 * DEG, 0.0])
ENTRY_HALF = np.array([500.0, 50.0, 0.05 * DEG, 0.01 * DEG, 0.1 * DEG, 0.01 * DEG])


def entry_sets(scale=1.0):
    X0 = Zonotope.from_box(ENTRY_CENTER - ENTRY_HALF, ENTRY_CENTER + ENTRY_HALF)
    lo = np.array([15 * DEG, -60 * DEG])
    hi = np.array([30 * DEG, -10 * DEG])
    mid, rad = 0.5 * (lo + hi), 0.5 * (hi - lo) * scale
    return X0, Zonotope.from_box(mid - rad, mid + rad)


def hull_arrays(tube):
    return [(setalg.interval_hull(s.set).lower, setalg.interval_hull(s.set).upper) for s in tube.steps]


# -- configuration ---------------------------------------------------------------


def test_config_validation():
    U = Zonotope.point([0.0])
    with pytest.raises(ValueError):
        ReachConfig(0.0, 1.0, U)
    with pytest.raises(ValueError):
        ReachConfig(1.0, 0.5, U)
    with pytest.raises(ValueError):
        ReachConfig(1.0, 2.0, U, max_order=0.5)
    with pytest.raises(ValueError):
        ReachConfig(1.0, 2.0, U, error_tolerance=[0.0])
    assert ReachConfig(0.1, 1.0, U).n_steps == 10


def test_step_rejects_negative_bound():
    with pytest.raises(ValueError):
        LinearizedStep(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros(1), np.zeros(1), np.zeros(1), np.array([-1.0]))


# -- linearization -----------------------------------------------------------------


def test_linear_model_has_no_remainder():
    m = LinearModel([[0.0, 1.0], [-2.0, -0.3]], [[0.0], [1.0]])
    step = linearize_at(m, Zonotope([1.0, 0.0], np.eye(2)), Zonotope([0.0], [[1.0]]))
    assert np.all(step.error_bound == 0.0)


def test_square_remainder():
    step = linearize_at(QuadraticModel([[1.0]]), Zonotope([0.0], [[1.0]]), Zonotope.point([0.0]))
    assert step.error_bound[0] == pytest.approx(1.0, abs=1e-15)
    # with signed Hessians the remainder z**2 is known to be nonnegative
    step = linearize_at(SignedQuadraticModel([[1.0]]), Zonotope([0.0], [[1.0]]), Zonotope.point([0.0]))
    assert step.error_bound[0] == pytest.approx(1.0, abs=1e-15)
    assert step.error_lower[0] == pytest.approx(0.0, abs=1e-15)
    assert step.error_upper[0] == pytest.approx(1.0, abs=1e-15)


def test_entry_remainder_dominates_samples():
    model = EntryModel()
    rng = np.random.default_rng(0)
    X0, U = entry_sets()
    step = linearize_at(model, X0, U)
    Z = np.hstack([setalg.sample_points(X0, 10_000, rng), setalg.sample_points(U, 10_000, rng)])
    J = np.hstack([step.A, step.B])
    worst = np.zeros(6)
    for z in Z:
        worst = np.maximum(worst, np.abs(model.rates(z[:6], z[6:]) - step.f_star - J @ (z - step.z_star)))
    assert np.all(worst <= step.error_bound)


# -- propagation -------------------------------------------------------------------------


def test_zero_dynamics_leave_set():
    m = LinearModel(np.zeros((2, 2)), np.zeros((2, 1)))
    R = Zonotope([1.0, 2.0], [[1.0, 0.2], [0.0, 0.5]])
    U = Zonotope.point([0.0])
    out = lin_reach_step(linearize_at(m, R, U), R, U, 3.0)
    box, ref = setalg.interval_hull(out), setalg.interval_hull(R)
    np.testing.assert_allclose(box.lower, ref.lower, atol=1e-15)
    np.testing.assert_allclose(box.upper, ref.upper, atol=1e-15)


def test_integrator_reach():
    m = LinearModel([[0.0]], [[1.0]])
    R, U = Zonotope.point([0.0]), Zonotope([0.0], [[1.0]])
    out = lin_reach_step(linearize_at(m, R, U), R, U, 1.0)
    box = setalg.interval_hull(out)
    assert box.lower[0] == pytest.approx(-1.0, abs=1e-9)
    assert box.upper[0] == pytest.approx(1.0, abs=1e-9)


def test_rotation_is_exact():
    m = LinearModel([[0.0, 1.0], [-1.0, 0.0]], np.zeros((2, 1)))
    R, U = Zonotope([1.0, 0.0], np.zeros((2, 0))), Zonotope.point([0.0])
    out = lin_reach_step(linearize_at(m, R, U), R, U, math.pi / 2)
    np.testing.assert_allclose(out.center, [0.0, -1.0], atol=1e-14)


def test_one_step_growth_scales_with_time_step():
    model = EntryModel()
    X0, U = entry_sets()
    base = setalg.interval_hull(X0)
    growth = []
    for dt in (1.0, 0.1):
        step = linearize_at(model, X0, U, region=enclosure(model, base, setalg.interval_hull(U), dt))
        out = setalg.minkowski_sum(lin_reach_step(step, X0, U, dt), error_set(step, dt))
        growth.append(np.max(np.abs(setalg.interval_hull(out).upper - base.upper) / ENTRY_HALF))
    assert 5.0 < growth[0] / growth[1] < 20.0


# -- error set ----------------------------------------------------------------------------


def test_error_set_zero():
    step = LinearizedStep(np.zeros((2, 2)), np.zeros((2, 1)), np.zeros(2), np.zeros(2), np.zeros(1), np.zeros(2))
    e = error_set(step, 0.5)
    assert e.n_generators == 0 and not np.any(e.center)


def test_error_set_scaling():
    step = LinearizedStep(np.zeros((2, 2)), np.zeros((2, 1)), np.zeros(2), np.zeros(2), np.zeros(1),
                          np.array([1.0, 0.0]))
    box = setalg.interval_hull(error_set(step, 0.1))
    np.testing.assert_allclose(box.upper, [0.1, 0.0], atol=1e-15)
    np.testing.assert_allclose(box.lower, [-0.1, 0.0], atol=1e-15)
    wide = setalg.interval_hull(error_set(step, 0.1, kappa=2.0))
    assert wide.upper[0] == pytest.approx(0.2)


def test_error_gain_dominates_matrix_exponential_integral():
    A = np.array([[-0.5, 2.0], [-1.0, 0.1]])
    gain = error_gain(A, 1.0)
    from scipy.integrate import trapezoid
    from scipy.linalg import expm

    s = np.linspace(0, 1, 2001)
    integral = trapezoid([np.abs(expm(A * t)) for t in s], s, axis=0)
    assert np.all(gain >= integral - 1e-6)


# -- whole tubes ---------------------------------------------------------------------------


def test_single_linear_step_matches_pieces():
    m = LinearModel([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]])
    X0, U = Zonotope([0.0, 0.0], np.eye(2) * 0.1), Zonotope([0.0], [[1.0]])
    tube = reach(m, X0, ReachConfig(0.5, 0.5, U))
    step = linearize_at(m, X0, U)
    ref = setalg.minkowski_sum(lin_reach_step(step, X0, U, 0.5), error_set(step, 0.5))
    assert len(tube.steps) == 1
    a, b = setalg.interval_hull(tube.steps[0].set), setalg.interval_hull(ref)
    np.testing.assert_allclose(a.lower, b.lower, atol=1e-14)
    np.testing.assert_allclose(a.upper, b.upper, atol=1e-14)


def test_time_intervals_tile_horizon():
    m = LinearModel([[-1.0]], [[1.0]])
    tube = reach(m, Zonotope([1.0], [[0.1]]), ReachConfig(0.25, 2.0, Zonotope([0.0], [[0.1]])))
    starts = [s.t_start for s in tube.steps]
    ends = [s.t_end for s in tube.steps]
    assert starts[0] == 0.0 and ends[-1] == pytest.approx(2.0)
    np.testing.assert_allclose(starts[1:], ends[:-1])


def test_nonbinding_constraint_changes_nothing():
    model = EntryModel()
    X0, U = entry_sets()
    cfg = ReachConfig(10.0, 30.0, U, remainder_pieces=1)
    free = reach(model, X0, cfg)
    far = Halfspace(np.eye(6)[0], 1e7)
    held = reach(model, X0, cfg, [far])
    for (a_lo, a_hi), (b_lo, b_hi) in zip(hull_arrays(free), hull_arrays(held)):
        np.testing.assert_array_equal(a_lo, b_lo)
        np.testing.assert_array_equal(a_hi, b_hi)


def test_reach_is_deterministic():
    model = EntryModel()
    X0, U = entry_sets()
    cfg = ReachConfig(10.0, 30.0, U, remainder_pieces=2, remainder_dims=3)
    a, b = reach(model, X0, cfg), reach(model, X0, cfg)
    for s, t in zip(a.steps, b.steps):
        assert np.array_equal(s.set.center, t.set.center)
        assert np.array_equal(s.set.generators, t.set.generators)
        assert np.array_equal(s.set.A, t.set.A)


def test_smaller_input_set_gives_smaller_tube():
    model = EntryModel()
    X0, U = entry_sets()
    _, U_small = entry_sets(0.5)
    cfg = ReachConfig(10.0, 40.0, U, remainder_pieces=1)
    big = hull_arrays(reach(model, X0, cfg))
    small = hull_arrays(reach(model, X0, ReachConfig(10.0, 40.0, U_small, remainder_pieces=1)))
    for (b_lo, b_hi), (s_lo, s_hi) in zip(big, small):
        assert np.all(s_lo >= b_lo - 1e-9 * (1 + np.abs(b_lo)))
        assert np.all(s_hi <= b_hi + 1e-9 * (1 + np.abs(b_hi)))


def test_tube_contains_sampled_trajectories():
    from hyreach.montecarlo import monte_carlo_validate

    model = EntryModel()
    X0, U = entry_sets()
    tube = reach(model, X0, ReachConfig(10.0, 40.0, U, remainder_pieces=1))
    report = monte_carlo_validate(tube, model, U, n_samples=100, seed=1, substeps=100)
    assert report.passed, report.to_dict()


def test_binding_constraint_terminates_branch():
    m = LinearModel([[0.0]], [[0.0]], c=[1.0])
    tube = reach(m, Zonotope([0.0], [[0.1]]), ReachConfig(1.0, 5.0, Zonotope.point([0.0])),
                 [Halfspace([1.0], 2.5)])
    assert tube.terminated == {"0": 3.0}
    assert len(tube.steps) == 2


# -- splitting -----------------------------------------------------------------------------------


def test_split_axis_follows_curvature():
    m = QuadraticModel([[0.0, 1.0], [0.0, 0.0]])
    R, U = Zonotope([0.0, 0.0], np.eye(2)), Zonotope.point([0.0])
    axis, _ = choose_split_axis(m, R, U, 0.1, [1e-3, 1e-3])
    assert axis == 1


def test_split_axis_tie_goes_low():
    m = QuadraticModel([[1.0, 1.0], [0.0, 0.0]])
    R, U = Zonotope([0.0, 0.0], np.eye(2)), Zonotope.point([0.0])
    axis, _ = choose_split_axis(m, R, U, 0.1, [1e-3, 1e-3])
    assert axis == 0


def test_splitting_creates_branches_and_stays_sound():
    from hyreach.montecarlo import monte_carlo_validate

    m = QuadraticModel([[-1.0, 0.0], [0.5, -0.5]])
    X0 = Zonotope([1.0, 1.0], np.eye(2) * 0.4)
    U = Zonotope.point([0.0])
    cfg = ReachConfig(0.2, 1.0, U, error_tolerance=[1e-3, 1e-3], max_splits=3)
    tube = reach(m, X0, cfg)
    assert len(tube.leaves) > 1
    assert tube.split_times
    report = monte_carlo_validate(tube, _Rk4Model(m), U, n_samples=200, seed=3, substeps=50)
    assert report.passed


def test_split_budget_warning_only_when_splitting_enabled():
    m = QuadraticModel([[-1.0]])
    X0, U = Zonotope([1.0], [[0.2]]), Zonotope.point([0.0])
    quiet = reach(m, X0, ReachConfig(0.1, 0.3, U, error_tolerance=[1e-9]))
    assert not quiet.split_budget_exhausted
    loud = reach(m, X0, ReachConfig(0.1, 0.3, U, error_tolerance=[1e-9], max_splits=1))
    assert loud.split_budget_exhausted


class _Rk4Model:
    """Adds the batched RK4 the Monte Carlo oracle needs to a toy model."""

    def __init__(self, m):
        self.m = m

    def rk4_batch(self, X0, U, dt, substeps):
        h = dt / substeps
        out = np.empty((X0.shape[0], U.shape[1] + 1, X0.shape[1]))
        out[:, 0] = X0
        for i, x in enumerate(X0):
            x = x.copy()
            for k in range(U.shape[1]):
                u = U[i, k]
                for _ in range(substeps):
                    k1 = self.m.rates(x, u)
                    k2 = self.m.rates(x + 0.5 * h * k1, u)
                    k3 = self.m.rates(x + 0.5 * h * k2, u)
                    k4 = self.m.rates(x + h * k3, u)
                    x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                out[i, k + 1] = x
        return out
