"""Conservative reachable tubes by conservative linearization.

Each step linearizes the dynamics at the centre of the current set and the
input set, propagates the affine model exactly with matrix exponentials,
bounds the second-order remainder with interval Hessians over an a priori
enclosure of the step, and bloats the result by the propagated error box.
Optional halfspace constraints are intersected after every step.

Any model exposing ``n_states``, ``n_inputs``, ``rates(x, u)``,
``jacobian(x, u)`` (n x (n+m)), ``interval_rates(z_lo, z_hi)`` and
``hessian_bounds(z_lo, z_hi)`` (n x (n+m) x (n+m)) can be used.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy.linalg import expm

from . import setalg
from .setalg import ConstrainedZonotope, Halfspace, IntervalBox, Zonotope

log = logging.getLogger(__name__)

Constraint = Union[Halfspace, Callable[[ConstrainedZonotope], Halfspace]]


class ReachError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReachConfig:
    time_step: float
    horizon: float
    input_set: Zonotope
    error_tolerance: np.ndarray | None = None
    max_splits: int = 0
    max_order: float = 20.0
    max_constraints: int | None = None
    kappa: float = 1.0
    split_gain: float = 1.0
    remainder_pieces: int = 3
    remainder_dims: int = 5
    enclosure_iterations: int = 40

    def __post_init__(self):
        if not self.time_step > 0:
            raise ValueError("time_step must be positive")
        if self.horizon < self.time_step * (1 - 1e-12):
            raise ValueError("horizon must be at least one time step")
        if self.max_splits < 0:
            raise ValueError("max_splits must be nonnegative")
        if self.max_order < 1:
            raise ValueError("max_order must be at least 1")
        if self.kappa < 1:
            raise ValueError("kappa must be at least 1")
        if self.error_tolerance is not None:
            tol = np.asarray(self.error_tolerance, dtype=float)
            if np.any(tol <= 0):
                raise ValueError("error tolerance must be positive")
            object.__setattr__(self, "error_tolerance", tol)

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.time_step))


@dataclass(frozen=True)
class LinearizedStep:
    """First-order model at ``z*`` with remainder bounds.

    ``error_bound`` is the symmetric bound |L_i| <= l_i.  ``error_lower`` and
    ``error_upper`` optionally give a tighter, possibly one-sided interval
    inside ``[-l, l]``.
    """

    A: np.ndarray
    B: np.ndarray
    f_star: np.ndarray
    x_star: np.ndarray
    u_star: np.ndarray
    error_bound: np.ndarray
    error_lower: np.ndarray | None = None
    error_upper: np.ndarray | None = None

    def __post_init__(self):
        l = np.asarray(self.error_bound, dtype=float)
        if np.any(l < 0):
            raise ValueError("error bound must be nonnegative")
        lo = -l if self.error_lower is None else np.maximum(self.error_lower, -l)
        hi = l if self.error_upper is None else np.minimum(self.error_upper, l)
        object.__setattr__(self, "error_bound", l)
        object.__setattr__(self, "error_lower", lo)
        object.__setattr__(self, "error_upper", hi)

    @property
    def z_star(self):
        return np.concatenate([self.x_star, self.u_star])

    @property
    def constant(self):
        """Offset of the affine model ``A x + B u + constant``."""
        return self.f_star - self.A @ self.x_star - self.B @ self.u_star


@dataclass(frozen=True)
class TubeStep:
    t_start: float
    t_end: float
    set: ConstrainedZonotope
    enclosure: IntervalBox
    z_star: np.ndarray
    branch_id: str
    error_bound: np.ndarray
    error_radius: np.ndarray


@dataclass
class ReachTube:
    initial_set: ConstrainedZonotope
    time_step: float
    n_steps: int
    steps: list = field(default_factory=list)
    lineage: dict = field(default_factory=lambda: {"0": None})
    split_times: dict = field(default_factory=dict)
    terminated: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    @property
    def branches(self) -> list:
        return list(self.lineage)

    @property
    def leaves(self) -> list:
        parents = {p for p in self.lineage.values() if p is not None}
        return [b for b in self.lineage if b not in parents]

    @property
    def split_budget_exhausted(self) -> bool:
        return any(w.startswith("split budget") for w in self.warnings)

    def step_index(self, step: TubeStep) -> int:
        return int(round(step.t_end / self.time_step))

    def path(self, branch: str) -> list:
        out = []
        while branch is not None:
            out.append(branch)
            branch = self.lineage[branch]
        return out[::-1]

    def steps_for(self, leaf: str) -> list:
        """Steps along the lineage from the root to ``leaf``, in time order."""
        on_path = set(self.path(leaf))
        chosen = [s for s in self.steps if s.branch_id in on_path]
        return sorted(chosen, key=lambda s: s.t_end)

    def sets_at(self, k: int) -> list:
        """All stored sets at time ``k * time_step`` (k = 0 is the initial set)."""
        if k == 0:
            return [self.initial_set]
        return [s.set for s in self.steps if self.step_index(s) == k]

    def steps_at(self, k: int) -> list:
        return [s for s in self.steps if self.step_index(s) == k]

    def centers(self, leaf: str = "0") -> np.ndarray:
        return np.array([self.initial_set.center] + [s.set.center for s in self.steps_for(leaf)])

    def hulls(self, branch_steps=None, use_lp: bool = True) -> list:
        steps = self.steps if branch_steps is None else branch_steps
        return [setalg.interval_hull(s.set, use_lp=use_lp) for s in steps]

    def union_hull(self, k: int, use_lp: bool = True) -> IntervalBox | None:
        sets = self.sets_at(k)
        if not sets:
            return None
        boxes = [setalg.interval_hull(z, use_lp=use_lp) for z in sets]
        return IntervalBox(np.min([b.lower for b in boxes], axis=0), np.max([b.upper for b in boxes], axis=0))

    def contains(self, k: int, x, slack: float = setalg.DEFAULT_TOL) -> bool:
        return any(setalg.contains_point(z, x, slack) for z in self.sets_at(k))


# ---------------------------------------------------------------------------
# building blocks


def _box_of(z) -> IntervalBox:
    """Constraint-ignoring hull; shared by constrained and unconstrained runs."""
    return setalg.interval_hull(z, use_lp=False)


def _hull_union(a: IntervalBox, b: IntervalBox) -> IntervalBox:
    return IntervalBox(np.minimum(a.lower, b.lower), np.maximum(a.upper, b.upper))


def enclosure(model, box: IntervalBox, u_box: IntervalBox, dt: float, max_iter: int = 40) -> IntervalBox:
    """Box containing every trajectory over ``[0, dt]`` from ``box`` under inputs in ``u_box``.

    Accepts a candidate once ``box + [0, dt] * F(candidate, U)`` lies inside it.
    """
    omega = box
    scale = np.maximum(box.width, 1e-9 * (1.0 + np.abs(box.center)))
    for _ in range(max_iter):
        F = model.interval_rates(np.concatenate([omega.lower, u_box.lower]),
                                 np.concatenate([omega.upper, u_box.upper]))
        lo = box.lower + dt * np.minimum(F.lo, 0.0)
        hi = box.upper + dt * np.maximum(F.hi, 0.0)
        if np.all(lo >= omega.lower) and np.all(hi <= omega.upper):
            return omega
        pad = 0.1 * (hi - lo) + 1e-3 * scale
        omega = _hull_union(omega, IntervalBox(lo - pad, hi + pad))
    raise ReachError("no a priori enclosure found; reduce the time step")


def _lagrange_bound(H, gamma) -> np.ndarray:
    return 0.5 * np.einsum("j,ijk,k->i", gamma, H, gamma)


def _lagrange_interval(H_lo, H_hi, gamma):
    """Interval of 0.5 d'H d over |d| <= gamma with H in [H_lo, H_hi].

    Squared terms keep their sign; mixed terms are symmetric.  Leading
    batch axes broadcast.
    """
    H_abs = np.maximum(np.abs(H_lo), np.abs(H_hi))
    g2 = gamma * gamma
    gg = gamma[..., :, None] * gamma[..., None, :]
    off = 0.5 * (np.einsum("...ijk,...jk->...i", H_abs, gg) - np.einsum("...ijj,...j->...i", H_abs, g2))
    diag_lo = 0.5 * np.einsum("...ijj,...j->...i", np.minimum(H_lo, 0.0), g2)
    diag_hi = 0.5 * np.einsum("...ijj,...j->...i", np.maximum(H_hi, 0.0), g2)
    return diag_lo - off, diag_hi + off


def _hessians(model, z_lo, z_hi):
    """(H_lo, H_hi) for one box or a stack of boxes."""
    if hasattr(model, "hessian_intervals"):
        try:
            lo, hi = model.hessian_intervals(z_lo, z_hi)
            return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        except (ValueError, IndexError, TypeError):
            if np.ndim(z_lo) == 1:
                raise
            pairs = [model.hessian_intervals(a, b) for a, b in zip(z_lo, z_hi)]
            return np.array([p[0] for p in pairs], dtype=float), np.array([p[1] for p in pairs], dtype=float)
    if np.ndim(z_lo) == 1:
        H = np.asarray(model.hessian_bounds(z_lo, z_hi), dtype=float)
    else:
        H = np.array([model.hessian_bounds(a, b) for a, b in zip(z_lo, z_hi)], dtype=float)
    return -H, H


def _grid(z_lo, z_hi, dims, pieces):
    """Sub-boxes cutting each of ``dims`` into ``pieces`` equal parts."""
    edges = [np.linspace(z_lo[j], z_hi[j], pieces + 1) for j in dims]
    lo = []
    hi = []
    for idx in np.ndindex(*([pieces] * len(dims))):
        a = z_lo.copy()
        b = z_hi.copy()
        for j, e, i in zip(dims, edges, idx):
            a[j], b[j] = e[i], e[i + 1]
        lo.append(a)
        hi.append(b)
    return np.array(lo), np.array(hi)


def _remainder_enclosure(model, z_star, f_star, J_star, z_lo, z_hi, H_lo, H_hi, pieces, n_dims):
    """Tighter remainder interval from Taylor expansions on sub-boxes.

    On each sub-box with centre ``s`` the remainder ``f - f* - J*(z - z*)``
    equals its value at ``s`` plus ``(J(s) - J*)(z - s)`` plus a Lagrange
    term over the sub-box; the union over sub-boxes encloses it everywhere.
    """
    n = f_star.shape[0]
    gamma = np.maximum(np.abs(z_lo - z_star), np.abs(z_hi - z_star))
    H_abs = np.maximum(np.abs(H_lo), np.abs(H_hi))
    l = _lagrange_bound(H_abs, gamma)
    share = (H_abs @ gamma) * gamma[None, :] / np.where(l > 0, l, 1.0)[:, None]
    weight = share.sum(axis=0)
    dims = [int(j) for j in np.argsort(-weight, kind="stable")[:n_dims] if weight[j] > 0 and z_hi[j] > z_lo[j]]
    if not dims:
        return None
    lo_b, hi_b = _grid(z_lo, z_hi, sorted(dims), pieces)
    centers = 0.5 * (lo_b + hi_b)
    half = 0.5 * (hi_b - lo_b)
    Hl, Hh = _hessians(model, lo_b, hi_b)
    q_lo, q_hi = _lagrange_interval(Hl, Hh, half)
    out_lo = np.full(n, np.inf)
    out_hi = np.full(n, -np.inf)
    for k in range(centers.shape[0]):
        x, u = centers[k, :n], centers[k, n:]
        fc = np.asarray(model.rates(x, u), dtype=float)
        Jc = np.asarray(model.jacobian(x, u), dtype=float)
        dz = centers[k] - z_star
        rc = fc - f_star - J_star @ dz
        lin = np.abs(Jc - J_star) @ half[k]
        # roundoff in the point evaluations
        eps = 64 * np.finfo(float).eps * (np.abs(fc) + np.abs(f_star) + np.abs(J_star) @ np.abs(dz))
        out_lo = np.minimum(out_lo, rc - lin + q_lo[k] - eps)
        out_hi = np.maximum(out_hi, rc + lin + q_hi[k] + eps)
    return out_lo, out_hi


def linearize_at(model, R, U: Zonotope, region: IntervalBox | None = None,
                 pieces: int = 1, n_dims: int = 3) -> LinearizedStep:
    """Affine model at the centre pair with a Lagrange remainder bound.

    Without ``region`` the remainder covers the set ``R x U`` itself;
    reachability passes the step enclosure so it covers the whole interval.
    With ``pieces > 1`` the ``n_dims`` coordinates contributing most to the
    bound are subdivided to tighten the remainder interval.
    """
    if not isinstance(R, Zonotope) and setalg.is_empty(R):
        raise setalg.EmptySetError("cannot linearize an empty set")
    n, m = model.n_states, model.n_inputs
    x_star = np.array(R.center, dtype=float)
    u_star = np.array(U.center, dtype=float)
    box = _box_of(R) if region is None else region
    ubox = setalg.interval_hull(U)
    z_star = np.concatenate([x_star, u_star])
    z_lo = np.concatenate([box.lower, ubox.lower])
    z_hi = np.concatenate([box.upper, ubox.upper])
    gamma = np.maximum(np.abs(z_lo - z_star), np.abs(z_hi - z_star))
    H_lo, H_hi = _hessians(model, z_lo, z_hi)
    H = np.maximum(np.abs(H_lo), np.abs(H_hi))
    e_lo, e_hi = _lagrange_interval(H_lo, H_hi, gamma)
    J = np.asarray(model.jacobian(x_star, u_star), dtype=float)
    f_star = np.asarray(model.rates(x_star, u_star), dtype=float)
    l = _lagrange_bound(H, gamma)
    if pieces > 1 and np.any(l > 0):
        refined = _remainder_enclosure(model, z_star, f_star, J, z_lo, z_hi, H_lo, H_hi, pieces, n_dims)
        if refined is not None:
            e_lo = np.maximum(e_lo, refined[0])
            e_hi = np.minimum(e_hi, refined[1])
            l = np.minimum(l, np.maximum(np.abs(e_lo), np.abs(e_hi)))
    return LinearizedStep(J[:, :n], J[:, n:n + m], f_star, x_star, u_star, l, e_lo, e_hi)


def _phi_gamma(A, dt):
    n = A.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = A * dt
    aug[:n, n:] = np.eye(n) * dt
    E = expm(aug)
    return E[:n, :n], E[:n, n:]


def error_gain(A, dt) -> np.ndarray:
    """Matrix bounding ``int_0^dt |exp(A s)| ds`` entrywise (equals dt*I when A = 0)."""
    return _phi_gamma(np.abs(A), dt)[1]


def lin_reach_step(step: LinearizedStep, R, U: Zonotope, dt: float):
    """Image of R after ``dt`` under the affine model, inputs held in U."""
    Phi, Gam = _phi_gamma(step.A, dt)
    shift = step.x_star - Phi @ step.x_star + Gam @ step.f_star
    mapped = setalg.translate(setalg.linear_map(Phi, R), shift)
    GB = Gam @ step.B
    u_part = Zonotope(np.zeros(step.A.shape[0]), GB @ U.generators)
    u_off = GB @ (U.center - step.u_star)
    return setalg.translate(setalg.minkowski_sum(mapped, u_part), u_off)


def error_set(step: LinearizedStep, dt: float, kappa: float = 1.0) -> Zonotope:
    """Axis-aligned box bounding the propagated remainder.

    The remainder interval's midpoint is propagated exactly; its radius is
    scaled by ``int |exp(A s)| ds`` (``dt`` when A = 0) and by ``kappa``.
    """
    mid = 0.5 * (step.error_lower + step.error_upper)
    rad = 0.5 * (step.error_upper - step.error_lower)
    _, Gam = _phi_gamma(step.A, dt)
    center = Gam @ mid
    radius = kappa * (error_gain(step.A, dt) @ rad)
    keep = radius > 0
    return Zonotope(center, np.diag(radius)[:, keep])


@dataclass(frozen=True)
class _StepOptions:
    kappa: float = 1.0
    enclosure_iterations: int = 40
    remainder_pieces: int = 1
    remainder_dims: int = 3

    @classmethod
    def of(cls, cfg: ReachConfig | None) -> "_StepOptions":
        if cfg is None:
            return cls()
        return cls(cfg.kappa, cfg.enclosure_iterations, cfg.remainder_pieces, cfg.remainder_dims)


def _error_radius(model, R, U, dt, opts: _StepOptions, u_box=None, tol=None):
    """Propagated error radius, tightened by subdivision only when it exceeds ``tol``."""
    ubox = setalg.interval_hull(U) if u_box is None else u_box
    omega = enclosure(model, _box_of(R), ubox, dt, opts.enclosure_iterations)
    step = linearize_at(model, R, U, region=omega)
    radius = setalg.interval_hull(error_set(step, dt, opts.kappa)).upper
    if opts.remainder_pieces > 1 and (tol is None or np.any(radius > tol)):
        step = linearize_at(model, R, U, region=omega, pieces=opts.remainder_pieces, n_dims=opts.remainder_dims)
        radius = setalg.interval_hull(error_set(step, dt, opts.kappa)).upper
    return radius, step, omega


def choose_split_axis(model, R, U: Zonotope, dt: float, tolerance, cfg: ReachConfig | None = None):
    """State axis whose split gives the smallest worst child error / tolerance.

    Each child's error is re-evaluated from scratch.  Returns
    ``(axis, score)``; ties go to the lowest index.
    """
    opts = _StepOptions.of(cfg)
    tol = np.asarray(tolerance, dtype=float)
    best_axis, best_score = 0, math.inf
    for axis in range(model.n_states):
        children = setalg.split(R, axis)
        if children[0] is R:
            continue
        score = max(float(np.max(_error_radius(model, c, U, dt, opts, None, tol)[0] / tol)) for c in children)
        if score < best_score:
            best_axis, best_score = axis, score
    return best_axis, best_score


def _apply_constraints(R, constraints: Sequence[Constraint]):
    for c in constraints:
        h = c(R) if callable(c) else c
        R = setalg.intersect_halfspace(R, h)
    return R


# ---------------------------------------------------------------------------
# driver


def _advance(model, R, U, dt, cfg, constraints, tol, precomputed=None):
    radius, step, omega = precomputed or _error_radius(model, R, U, dt, _StepOptions.of(cfg), None, tol)
    nxt = setalg.minkowski_sum(lin_reach_step(step, R, U, dt), error_set(step, dt, cfg.kappa))
    constrained = _apply_constraints(nxt, constraints)
    if constrained is not nxt and setalg.is_empty(constrained):
        return None, step, omega, radius
    return setalg.reduce_order(constrained, cfg.max_order, cfg.max_constraints), step, omega, radius


def reach(model, X0, cfg: ReachConfig, constraints: Sequence[Constraint] = ()) -> ReachTube:
    """Compute the reachable tube from ``X0`` over the configured horizon.

    Active branches advance together one step at a time, in creation order.
    A branch whose propagated error exceeds the tolerance is split once on
    the best axis when that lowers its normalised error and budget remains.
    """
    X0 = setalg.as_cz(X0)
    if setalg.is_empty(X0):
        raise setalg.EmptySetError("initial set is empty")
    U = cfg.input_set
    if X0.dim != model.n_states or U.dim != model.n_inputs:
        raise ValueError("set dimensions do not match the model")
    dt = cfg.time_step
    tol = cfg.error_tolerance
    if tol is None:
        tol = 0.01 * _box_of(X0).width
        tol = np.where(tol > 0, tol, 1e-9)
    ubox = setalg.interval_hull(U)
    opts = _StepOptions.of(cfg)
    tube = ReachTube(initial_set=X0, time_step=dt, n_steps=cfg.n_steps)
    splits_left = cfg.max_splits
    active = [("0", X0)]
    for k in range(cfg.n_steps):
        nxt_active = []
        for branch, R in active:
            pre = _error_radius(model, R, U, dt, opts, ubox, tol)
            work = [(branch, R, pre)]
            ratio = float(np.max(pre[0] / tol))
            if ratio > 1.0:
                if splits_left > 0:
                    axis, score = choose_split_axis(model, R, U, dt, tol, cfg)
                    if score < cfg.split_gain * ratio:
                        splits_left -= 1
                        ids = (branch + ".0", branch + ".1")
                        for cid in ids:
                            tube.lineage[cid] = branch
                        tube.split_times[branch] = k * dt
                        log.info("split branch %s on axis %d at t=%g", branch, axis, k * dt)
                        work = [(cid, child, None) for cid, child in zip(ids, setalg.split(R, axis))]
                elif cfg.max_splits > 0 and not tube.split_budget_exhausted:
                    tube.warnings.append(f"split budget exhausted at t={k * dt:g} (branch {branch})")
            for bid, S, p in work:
                out, step, omega, radius = _advance(model, S, U, dt, cfg, constraints, tol, p)
                if out is None:
                    tube.terminated[bid] = (k + 1) * dt
                    log.info("branch %s emptied by constraints at t=%g", bid, (k + 1) * dt)
                    continue
                tube.steps.append(TubeStep(k * dt, (k + 1) * dt, out, omega, step.z_star, bid,
                                           step.error_bound, radius))
                nxt_active.append((bid, out))
        active = nxt_active
        if not active:
            break
    if any(np.any(s.error_radius > tol) for s in tube.steps):
        tube.warnings.append("error tolerance not met on some steps")
    return tube
