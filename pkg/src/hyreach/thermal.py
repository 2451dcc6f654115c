"""Stagnation-point convective heating and the heat-rate constraint."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Environment, density
from .setalg import EmptySetError, Halfspace, Zonotope, interval_hull, is_empty

EXPONENT_V = 3.05
KELVIN_OFFSET = 273.15


@dataclass(frozen=True)
class ThermalParams:
    C: float = 1.1813e-3
    sigma: float = 5.67e-8
    epsilon: float = 0.8
    Qdot_max: float = 4.0e6

    def __post_init__(self):
        if min(self.C, self.sigma, self.Qdot_max) <= 0:
            raise ValueError("thermal constants must be positive")
        if not 0 < self.epsilon <= 1:
            raise ValueError("emissivity must lie in (0, 1]")


def heat_rate(h, v, params: ThermalParams = ThermalParams(), env: Environment = Environment()):
    """Convective stagnation-point heat flux in W/m^2."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("speed must be nonnegative")
    q = params.C * np.sqrt(density(h, env)) * v**EXPONENT_V
    return float(q) if np.ndim(q) == 0 else q


def heat_rate_gradient(h, v, params: ThermalParams = ThermalParams(), env: Environment = Environment()):
    """Partials (dQ/dh, dQ/dv)."""
    q = heat_rate(h, v, params, env)
    return -q / (2.0 * env.hr), EXPONENT_V * q / v


def surface_temperature(qdot, params: ThermalParams = ThermalParams()):
    """Radiative-equilibrium wall temperature in kelvin."""
    qdot = np.asarray(qdot, dtype=float)
    if np.any(qdot < 0):
        raise ValueError("heat rate must be nonnegative")
    t = (qdot / (params.sigma * params.epsilon)) ** 0.25
    return float(t) if np.ndim(t) == 0 else t


def surface_temperature_celsius(qdot, params: ThermalParams = ThermalParams()):
    return surface_temperature(qdot, params) - KELVIN_OFFSET


@dataclass(frozen=True)
class HeatProfile:
    t: np.ndarray
    qdot: np.ndarray
    load: np.ndarray
    peak_rate: float
    peak_time: float

    @property
    def total_load(self) -> float:
        return float(self.load[-1])


def heat_load(t, h, v, params: ThermalParams = ThermalParams(), env: Environment = Environment()) -> HeatProfile:
    """Cumulative heat load by trapezoidal integration of the sampled rate."""
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.shape[0] < 2:
        raise ValueError("need at least two samples")
    if np.any(np.diff(t) <= 0):
        raise ValueError("sample times must be strictly increasing")
    q = np.asarray(heat_rate(h, v, params, env), dtype=float)
    load = np.concatenate([[0.0], np.cumsum(0.5 * (q[1:] + q[:-1]) * np.diff(t))])
    k = int(np.argmax(q))
    return HeatProfile(t, q, load, float(q[k]), float(t[k]))


def heat_limit_halfspace(
    anchor,
    params: ThermalParams = ThermalParams(),
    env: Environment = Environment(),
    n_states: int = 6,
) -> Halfspace:
    """First-order heat-rate constraint about ``anchor = (h0, v0)``.

    The halfspace is ``grad . (x - x0) <= Qmax - Q(x0)`` in the (h, v)
    coordinates, scaled to a unit normal.
    """
    h0, v0 = float(anchor[0]), float(anchor[1])
    if v0 <= 0:
        raise ValueError("anchor speed must be positive")
    q0 = heat_rate(h0, v0, params, env)
    dh, dv = heat_rate_gradient(h0, v0, params, env)
    normal = np.zeros(n_states)
    normal[0], normal[1] = dh, dv
    offset = params.Qdot_max - q0 + dh * h0 + dv * v0
    return Halfspace(normal, offset).normalized()


def audit_halfspace(
    halfspace: Halfspace,
    anchor,
    half_widths=(2000.0, 100.0),
    n_samples: int = 10_000,
    audit_factor: float = 0.05,
    seed: int = 0,
    params: ThermalParams = ThermalParams(),
    env: Environment = Environment(),
):
    """Sample a trust box around the anchor; check admitted points stay near the limit.

    Returns ``(ok, worst_ratio, n_admitted)`` where ``worst_ratio`` is the
    largest Q/Qmax among admitted samples (0 when none are admitted).
    """
    rng = np.random.default_rng(seed)
    lo = np.array([anchor[0] - half_widths[0], anchor[1] - half_widths[1]])
    hi = np.array([anchor[0] + half_widths[0], anchor[1] + half_widths[1]])
    pts = rng.uniform(lo, hi, size=(n_samples, 2))
    admitted = pts @ halfspace.normal[:2] <= halfspace.offset
    if not np.any(admitted):
        return True, 0.0, 0
    q = heat_rate(pts[admitted, 0], np.maximum(pts[admitted, 1], 0.0), params, env)
    worst = float(np.max(q) / params.Qdot_max)
    return worst <= 1.0 + audit_factor, worst, int(admitted.sum())


def max_heat_rate_over_set(z, params: ThermalParams = ThermalParams(), env: Environment = Environment()) -> float:
    """Upper bound on the heat rate over a set, from its interval hull.

    The rate falls with altitude and rises with speed, so the (lowest h,
    highest v) corner of the hull is the worst case.
    """
    if not isinstance(z, Zonotope) and is_empty(z):
        raise EmptySetError("empty set")
    box = interval_hull(z)
    return heat_rate(box.lower[0], max(box.upper[1], 0.0), params, env)


def limit_altitude(v, params: ThermalParams = ThermalParams(), env: Environment = Environment()):
    """Altitude on the curve Q(h, v) = Qmax for each speed."""
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise ValueError("speed must be positive")
    return 2.0 * env.hr * np.log(params.C * math.sqrt(env.rho0) * v**EXPONENT_V / params.Qdot_max)


def limit_curve(v_min: float, v_max: float, n: int = 200, params: ThermalParams = ThermalParams(),
                env: Environment = Environment()):
    """Points ``(v, h)`` along the heat-rate limit curve."""
    v = np.linspace(v_min, v_max, n)
    return np.column_stack([v, limit_altitude(v, params, env)])


def first_crossing_time(t, h, v, params: ThermalParams = ThermalParams(), env: Environment = Environment(),
                        factor: float = 1.0):
    """First sample time with Q > factor * Qmax, or None."""
    q = np.asarray(heat_rate(h, v, params, env))
    idx = np.nonzero(q > factor * params.Qdot_max)[0]
    return float(np.asarray(t)[idx[0]]) if idx.size else None
