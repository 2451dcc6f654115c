"""Point-mass re-entry vehicle model.

State order is ``[h, v, gamma, theta, psi, phi]`` (altitude, speed, flight-path
angle, latitude, heading, longitude) and the control is ``[alpha, beta]``
(angle of attack, bank angle).  All angles are radians; the aerodynamic
coefficient polynomials are evaluated with alpha in degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import kernels
from .interval import Interval, IntervalOps, Jet, JetOps

RAD2DEG = 180.0 / math.pi
STATE_NAMES = ("h", "v", "gamma", "theta", "psi", "phi")
INPUT_NAMES = ("alpha", "beta")

# singularity guard
MIN_SPEED = 1.0
MIN_COS = 1e-6


class DomainError(ValueError):
    """Evaluation too close to a singular manifold of the equations of motion."""


class EntryState(NamedTuple):
    h: float
    v: float
    gamma: float
    theta: float
    psi: float
    phi: float


class ControlInput(NamedTuple):
    alpha: float
    beta: float


@dataclass(frozen=True)
class VehicleParams:
    m: float = 340.0
    S: float = 0.30
    a0: float = -0.20704
    a1: float = 0.029244
    b0: float = 0.07854
    b1: float = -0.61592e-2
    b2: float = 0.621408e-3

    def __post_init__(self):
        if not (self.m > 0 and self.S > 0):
            raise ValueError("mass and reference area must be positive")

    def lift_coefficient(self, alpha):
        ad = alpha * RAD2DEG
        return self.a0 + self.a1 * ad

    def drag_coefficient(self, alpha):
        ad = alpha * RAD2DEG
        return self.b0 + self.b1 * ad + self.b2 * ad * ad


@dataclass(frozen=True)
class Environment:
    rho0: float = 1.225
    hr: float = 7500.0
    G: float = 3.986e14
    Re: float = 6.378e6

    def __post_init__(self):
        if min(self.rho0, self.hr, self.G, self.Re) <= 0:
            raise ValueError("environment constants must be positive")


def param_vector(params: VehicleParams, env: Environment) -> np.ndarray:
    return np.array(
        [env.G, env.rho0, env.Re, env.hr, params.S, params.m,
         params.a0, params.a1, params.b0, params.b1, params.b2]
    )


def density(h, env: Environment = Environment()):
    return env.rho0 * np.exp(-np.asarray(h, dtype=float) / env.hr)


def gravity(h, env: Environment = Environment()):
    r = env.Re + np.asarray(h, dtype=float)
    if np.any(r <= 0):
        raise DomainError("radius Re + h must be positive")
    return env.G / (r * r)


def aero_forces(h, v, alpha, params: VehicleParams = VehicleParams(), env: Environment = Environment()):
    """Lift and drag in newtons."""
    q = 0.5 * params.S * density(h, env) * np.asarray(v, dtype=float) ** 2
    return q * params.lift_coefficient(alpha), q * params.drag_coefficient(alpha)


def _check_point(x, env: Environment):
    if x[1] < MIN_SPEED:
        raise DomainError(f"speed {x[1]:.3g} m/s below guard {MIN_SPEED} m/s")
    if abs(math.cos(x[3])) < MIN_COS:
        raise DomainError("latitude too close to a pole")
    if env.Re + x[0] <= 0:
        raise DomainError("radius Re + h must be positive")


def eom(x, u, params: VehicleParams = VehicleParams(), env: Environment = Environment()) -> np.ndarray:
    """Time derivative of the state."""
    x = np.asarray(x, dtype=float)
    _check_point(x, env)
    return kernels.rates(x, np.asarray(u, dtype=float), param_vector(params, env))


def step_euler(x, u, Ts: float, params: VehicleParams = VehicleParams(), env: Environment = Environment()):
    if Ts <= 0:
        raise ValueError("Ts must be positive")
    x = np.asarray(x, dtype=float)
    return x + Ts * eom(x, u, params, env)


@dataclass(frozen=True)
class PiecewiseControl:
    """Control held constant over consecutive segments of equal duration."""

    segment: float
    values: np.ndarray = field(repr=False)

    def __call__(self, t: float) -> np.ndarray:
        k = min(int(math.floor(t / self.segment + 1e-12)), len(self.values) - 1)
        return np.asarray(self.values[max(k, 0)], dtype=float)


def integrate_rk4(
    x0,
    control_signal: PiecewiseControl | Callable[[float], Sequence[float]],
    t_f: float,
    dt: float,
    params: VehicleParams = VehicleParams(),
    env: Environment = Environment(),
    rates: Callable | None = None,
):
    """Classical RK4 with the control frozen over each step.

    Returns ``(t, X)`` sampled every ``dt``.  ``rates`` overrides the
    vehicle dynamics (used by tests with constructed models).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n_steps = int(round(t_f / dt))
    if abs(n_steps * dt - t_f) > 1e-9 * max(1.0, t_f):
        raise ValueError("dt must divide t_f")
    if isinstance(control_signal, PiecewiseControl):
        ratio = control_signal.segment / dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("dt must divide the control segment length")
    if rates is None:
        pvec = param_vector(params, env)

        def rates(x, u):
            return kernels.rates(x, u, pvec)

    X = np.empty((n_steps + 1, len(x0)))
    X[0] = x0
    x = np.array(x0, dtype=float)
    for k in range(n_steps):
        t = k * dt
        u = np.asarray(control_signal(t), dtype=float)
        k1 = rates(x, u)
        k2 = rates(x + 0.5 * dt * k1, u)
        k3 = rates(x + 0.5 * dt * k2, u)
        k4 = rates(x + dt * k3, u)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise DomainError(f"non-finite state at t={t + dt:g}")
        X[k + 1] = x
    return np.arange(n_steps + 1) * dt, X


def jacobian(z, params: VehicleParams = VehicleParams(), env: Environment = Environment()):
    """Analytic Jacobian at the combined point ``z = (x, u)``.

    Returns the 6x6 state block and the 6x2 input block.
    """
    z = np.asarray(z, dtype=float)
    _check_point(z[:6], env)
    J = kernels.jacobian(z[:6], z[6:8], param_vector(params, env))
    return J[:, :6], J[:, 6:]


# ---------------------------------------------------------------------------
# generic evaluation (floats, intervals, jets)


def _generic_rates(z, params: VehicleParams, env: Environment, ops):
    h, v, gam, th, psi, _phi, alpha, beta = z
    r = h + env.Re
    rho = ops.exp(h * (-1.0 / env.hr)) * env.rho0
    g = env.G / (r * r)
    ad = alpha * RAD2DEG
    cl = ad * params.a1 + params.a0
    cd = ad * params.b1 + ad * ad * params.b2 + params.b0
    q = rho * v * v * (0.5 * params.S)
    lift_per_mv = q * cl / (v * params.m)
    drag_per_m = q * cd * (1.0 / params.m)
    sg, cg = ops.sin(gam), ops.cos(gam)
    st, ct = ops.sin(th), ops.cos(th)
    sp, cp = ops.sin(psi), ops.cos(psi)
    sb, cb = ops.sin(beta), ops.cos(beta)
    vr = v / r
    return [
        v * sg,
        -drag_per_m - g * sg,
        lift_per_mv * cb + cg * (vr - g / v),
        vr * cg * sp,
        lift_per_mv * sb / cg - vr * cg * cp * st / ct,
        vr * cg * cp / ct,
    ]


def _check_box(lo, hi, env: Environment):
    if np.any(lo[..., 1] < MIN_SPEED):
        raise DomainError("speed range reaches below the guard")
    if np.any(env.Re + lo[..., 0] <= 0):
        raise DomainError("altitude range reaches the planet centre")
    for idx, name in ((3, "latitude"), (2, "flight-path angle")):
        c = IntervalOps.cos(Interval(lo[..., idx], hi[..., idx]))
        if np.any((c.lo < MIN_COS) & (c.hi > -MIN_COS)):
            raise DomainError(f"{name} range too close to a cos=0 singularity")


def interval_rates(z_lo, z_hi, params: VehicleParams = VehicleParams(), env: Environment = Environment()) -> Interval:
    """Enclosure of the rates over the box ``[z_lo, z_hi]`` in (x, u) space."""
    z_lo = np.asarray(z_lo, dtype=float)
    z_hi = np.asarray(z_hi, dtype=float)
    _check_box(z_lo, z_hi, env)
    z = [Interval(z_lo[i], z_hi[i]) for i in range(8)]
    out = _generic_rates(z, params, env, IntervalOps)
    return Interval(np.array([o.lo for o in out]), np.array([o.hi for o in out]))


def hessian_enclosures(z_lo, z_hi, params: VehicleParams = VehicleParams(), env: Environment = Environment()):
    """Interval Hessians of the six rates over a box.

    Returns a list of six `Interval` objects shaped (8, 8); with stacked
    boxes of shape (k, 8) each is shaped (k, 8, 8).
    """
    z_lo = np.asarray(z_lo, dtype=float)
    z_hi = np.asarray(z_hi, dtype=float)
    _check_box(z_lo, z_hi, env)
    z = [Jet.variable(Interval(z_lo[..., i], z_hi[..., i]), i, 8) for i in range(8)]
    return [o.H for o in _generic_rates(z, params, env, JetOps)]


def hessian_abs_max(i: int, z_lo, z_hi, params: VehicleParams = VehicleParams(), env: Environment = Environment()):
    """Entrywise bound on |d2 f_i / dz2| over the box ``[z_lo, z_hi]``."""
    return hessian_enclosures(z_lo, z_hi, params, env)[i].mag()


def point_hessians(z, params: VehicleParams = VehicleParams(), env: Environment = Environment()):
    """Exact Hessians (6, 8, 8) at a point, via degenerate jets."""
    z = np.asarray(z, dtype=float)
    H = hessian_enclosures(z, z, params, env)
    return np.array([0.5 * (Hi.lo + Hi.hi) for Hi in H])


# ---------------------------------------------------------------------------
# model object consumed by the reachability engine and the MPC


class EntryModel:
    n_states = 6
    n_inputs = 2
    state_names = STATE_NAMES
    input_names = INPUT_NAMES

    def __init__(self, params: VehicleParams = VehicleParams(), env: Environment = Environment()):
        self.params = params
        self.env = env
        self.pvec = param_vector(params, env)

    def rates(self, x, u):
        return eom(x, u, self.params, self.env)

    def jacobian(self, x, u):
        A, B = jacobian(np.concatenate([x, u]), self.params, self.env)
        return np.hstack([A, B])

    def interval_rates(self, z_lo, z_hi) -> Interval:
        return interval_rates(z_lo, z_hi, self.params, self.env)

    def hessian_bounds(self, z_lo, z_hi) -> np.ndarray:
        return np.array([H.mag() for H in hessian_enclosures(z_lo, z_hi, self.params, self.env)])

    def hessian_intervals(self, z_lo, z_hi):
        """Lower and upper Hessian bounds shaped (6, 8, 8), or (k, 6, 8, 8) for stacked boxes."""
        H = hessian_enclosures(z_lo, z_hi, self.params, self.env)
        ax = np.ndim(z_lo) - 1
        return np.stack([h.lo for h in H], axis=ax), np.stack([h.hi for h in H], axis=ax)

    def rk4_batch(self, X0, U, dt_seg, substeps):
        return kernels.rk4_batch(X0, U, dt_seg, substeps, self.pvec)

    def euler_rollout(self, x0, U, Ts):
        return kernels.euler_rollout(x0, U, Ts, self.pvec)
