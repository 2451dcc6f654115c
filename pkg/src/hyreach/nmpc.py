"""Receding-horizon tracking with reachable-tube membership constraints.

The prediction model is the forward-Euler discretisation of the dynamics.
Each OCP is solved by sequential convexification: the Euler rollout is
linearised about the current input iterate (single shooting, so predicted
states always satisfy the discrete dynamics), a convex QP is solved with
Clarabel inside a trust region, and the step is accepted on an exact-penalty
merit test.  Tube membership is encoded exactly by lifting each predicted
state onto the generator coefficients of its step set.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import clarabel
import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from . import setalg
from .dynamics import EntryModel
from .reach import ReachTube
from .setalg import IntervalBox, Zonotope

log = logging.getLogger(__name__)

OK_STATUSES = ("optimal", "stalled", "max_iter")


class MpcError(RuntimeError):
    pass


class TubeInfeasible(MpcError):
    """No branch of the tube contains the queried state."""


def _check_pd(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ValueError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} must be positive definite") from None
    return M


@dataclass(frozen=True)
class MpcConfig:
    horizon: int = 20
    sampling_time: float = 0.1
    Q: np.ndarray = field(default_factory=lambda: 100.0 * np.eye(6))
    R: np.ndarray = field(default_factory=lambda: np.eye(2))
    du_max: np.ndarray | None = None
    tol_stationarity: float = 1e-6
    tol_dyn: float = 1e-6
    tol_con: float = 1e-6
    tol_progress: float = 1e-5
    max_iterations: int = 15
    trust_radius: float = 0.2
    penalty: float = 1e3
    plant: str = "rk4"
    plant_substeps: int = 10

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not self.sampling_time > 0:
            raise ValueError("sampling_time must be positive")
        object.__setattr__(self, "Q", _check_pd(self.Q, "Q"))
        object.__setattr__(self, "R", _check_pd(self.R, "R"))
        if self.du_max is not None:
            du = np.asarray(self.du_max, dtype=float)
            if np.any(du < 0):
                raise ValueError("rate bounds must be nonnegative")
            object.__setattr__(self, "du_max", du)
        if self.plant not in ("rk4", "euler"):
            raise ValueError("plant must be 'rk4' or 'euler'")
        if self.max_iterations < 1 or self.trust_radius <= 0 or self.penalty <= 0:
            raise ValueError("solver settings must be positive")


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Per-sample state and input references, held at the last value beyond the end."""

    x_ref: np.ndarray
    u_ref: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x_ref, dtype=float))
        u = np.atleast_2d(np.asarray(self.u_ref, dtype=float))
        if u.shape[0] == 1 and x.shape[0] > 1:
            u = np.repeat(u, x.shape[0], axis=0)
        if x.shape[0] != u.shape[0]:
            raise ValueError("state and input references differ in length")
        object.__setattr__(self, "x_ref", x)
        object.__setattr__(self, "u_ref", u)

    def __len__(self):
        return self.x_ref.shape[0]

    def window(self, k: int, n: int):
        """References for states k+1..k+n and inputs k..k+n-1."""
        last = len(self) - 1
        xi = np.minimum(np.arange(k + 1, k + n + 1), last)
        ui = np.minimum(np.arange(k, k + n), last)
        return self.x_ref[xi], self.u_ref[ui]


@dataclass
class MpcSolution:
    inputs: np.ndarray
    states: np.ndarray
    cost: float
    status: str
    iterations: int
    violation: float
    defect: float
    active: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in OK_STATUSES


def tracking_cost(states, inputs, x_ref, u_ref, cfg: MpcConfig) -> float:
    """Sum of the weighted squared state and input deviations."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    x_ref = np.atleast_2d(np.asarray(x_ref, dtype=float))
    u_ref = np.atleast_2d(np.asarray(u_ref, dtype=float))
    if states.shape != x_ref.shape or inputs.shape != u_ref.shape:
        raise ValueError("trajectory and reference shapes differ")
    if states.shape[0] != inputs.shape[0]:
        raise ValueError("state and input sequences differ in length")
    if states.shape[1] != cfg.Q.shape[0] or inputs.shape[1] != cfg.R.shape[0]:
        raise ValueError("weights do not match the trajectory dimensions")
    dx = states - x_ref
    du = inputs - u_ref
    return float(np.einsum("ki,ij,kj->", dx, cfg.Q, dx) + np.einsum("ki,ij,kj->", du, cfg.R, du))


# ---------------------------------------------------------------------------
# tube membership


@dataclass(frozen=True)
class MembershipBlock:
    """Lifted constraint ``x = c + G xi, A xi = b, |xi|_inf <= 1``."""

    center: np.ndarray
    generators: np.ndarray
    A: np.ndarray
    b: np.ndarray
    branch: str
    step: int

    @property
    def n_lifted(self) -> int:
        return self.generators.shape[1]

    @cached_property
    def _lifted_pinv(self):
        return np.linalg.pinv(np.vstack([self.generators, self.A]))

    def surely_contains(self, x) -> bool:
        """Cheap sufficient test: the least-norm coefficients already fit the unit box."""
        if self.n_lifted == 0:
            return False
        rhs = np.concatenate([np.asarray(x, dtype=float) - self.center, self.b])
        xi = self._lifted_pinv @ rhs
        M = np.vstack([self.generators, self.A])
        ok = np.allclose(M @ xi, rhs, rtol=0, atol=1e-9 * (1.0 + np.abs(rhs).max()))
        return bool(ok and np.max(np.abs(xi)) <= 1.0)

    def as_set(self):
        return setalg.ConstrainedZonotope(self.center, self.generators, self.A, self.b)

    def is_feasible(self, x, slack: float = 1e-9) -> bool:
        """Feasibility of the lifted system for a fixed ``x``."""
        p = self.n_lifted
        Aeq = np.vstack([self.generators, self.A])
        beq = np.concatenate([np.asarray(x, dtype=float) - self.center, self.b])
        if p == 0:
            return bool(np.all(np.abs(beq) <= slack * (1.0 + np.abs(x).max())))
        scale = np.max(np.abs(Aeq), axis=1)
        keep = scale > 0
        if np.any(np.abs(beq[~keep]) > slack * (1.0 + np.abs(x).max())):
            return False
        res = linprog(np.zeros(p), A_eq=Aeq[keep] / scale[keep, None], b_eq=beq[keep] / scale[keep],
                      bounds=[(-1.0 - slack, 1.0 + slack)] * p, method="highs")
        return res.status == 0


def _branch_for(tube: ReachTube, k: int, x, set_of: Callable | None = None) -> str:
    """Leaf whose lineage holds ``x`` at step k; nearest centre breaks ties.

    ``set_of(leaf)`` overrides which set of a branch is tested.
    """
    leaves = tube.leaves
    if len(leaves) == 1:
        return leaves[0]
    x = np.asarray(x, dtype=float)
    holding = []
    for leaf in leaves:
        z = _set_on_branch(tube, leaf, k) if set_of is None else set_of(leaf)
        if z is not None and setalg.contains_point(z, x, 1e-9):
            holding.append((float(np.linalg.norm(z.center - x)), leaf))
    if not holding:
        raise TubeInfeasible(f"no tube branch contains the state at step {k}")
    return min(holding)[1]


def _set_on_branch(tube: ReachTube, leaf: str, k: int):
    """Set at step k on a branch; the last stored set past the end."""
    if k <= 0:
        return tube.initial_set
    steps = tube.steps_for(leaf)
    if not steps:
        return tube.initial_set
    return steps[min(k, len(steps)) - 1].set


def tube_position(tube: ReachTube, sampling_time: float, i: int) -> tuple[int, bool]:
    """Tube step covering controller sample ``i`` and whether the sample lies strictly inside it.

    The tube step must divide the sampling time or be a whole multiple of it.
    """
    ratio = sampling_time / tube.time_step
    if ratio >= 1:
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("tube time step must divide the sampling time or be a multiple of it")
        return i * int(round(ratio)), False
    per = tube.time_step / sampling_time
    if abs(per - round(per)) > 1e-9:
        raise ValueError("tube time step must divide the sampling time or be a multiple of it")
    k, r = divmod(i, int(round(per)))
    return k + (r > 0), r > 0


def sample_set(tube: ReachTube, sampling_time: float, i: int, leaf: str):
    """Tube set for controller sample ``i`` on a branch.

    On a step boundary this is the stored set.  Strictly inside a step it is
    the step's interval enclosure, which covers every reachable state over
    the step; past the end of the tube the last set is held.
    """
    k, inside = tube_position(tube, sampling_time, i)
    steps = tube.steps_for(leaf)
    if not inside or k > len(steps):
        return _set_on_branch(tube, leaf, k)
    e = steps[k - 1].enclosure
    return Zonotope.from_box(e.lower, e.upper)


def tube_membership_constraints(tube: ReachTube, k: int, x_current=None, branch: str | None = None) -> MembershipBlock:
    """Exact lifted membership block for the tube set at step ``k``.

    With several branches the one holding ``x_current`` (at step 0 of the
    query, i.e. the branch's own step ``k``) is used unless ``branch`` is given.
    """
    if k < 0:
        raise ValueError("step index must be nonnegative")
    if branch is None:
        branch = tube.leaves[0] if x_current is None else _branch_for(tube, k, x_current)
    z = setalg.as_cz(_set_on_branch(tube, branch, k))
    return MembershipBlock(z.center, z.generators, z.A, z.b, branch, k)


# ---------------------------------------------------------------------------
# OCP


def _input_box(U) -> IntervalBox:
    return U if isinstance(U, IntervalBox) else setalg.interval_hull(U)


def _rollout(model, x0, U, Ts):
    """Euler states, plus per-stage (Jx, Ju) when the model's kernel provides them."""
    if hasattr(model, "euler_rollout"):
        X, Jx, Ju = model.euler_rollout(np.asarray(x0, dtype=float), np.ascontiguousarray(U), Ts)
        return np.asarray(X), (Jx, Ju)
    X = np.empty((U.shape[0] + 1, len(x0)))
    X[0] = x0
    for j in range(U.shape[0]):
        X[j + 1] = X[j] + Ts * np.asarray(model.rates(X[j], U[j]), dtype=float)
    return X, None


def _sensitivities(model, X, U, Ts, jac=None):
    """d x_{j+1} / d u_i for the Euler rollout, stacked (N, n, N*m)."""
    N, m = U.shape
    n = X.shape[1]
    S = np.zeros((N, n, N * m))
    for j in range(N):
        if jac is None:
            J = np.asarray(model.jacobian(X[j], U[j]), dtype=float)
            Jx, Ju = J[:, :n], J[:, n:]
        else:
            Jx, Ju = jac[0][j], jac[1][j]
        Aj = np.eye(n) + Ts * Jx
        if j > 0:
            S[j] = Aj @ S[j - 1]
        S[j, :, j * m:(j + 1) * m] = Ts * Ju
    return S


def _violation(blocks, X) -> float:
    worst = 0.0
    for i, blk in enumerate(blocks):
        if blk is None or blk.surely_contains(X[i]):
            continue
        Aeq = np.vstack([blk.generators, blk.A])
        beq = np.concatenate([X[i] - blk.center, blk.b])
        worst = max(worst, setalg.min_coefficient_norm(Aeq, beq)[0] - 1.0)
    return worst


def _margins(blocks, X):
    out = np.zeros(len(blocks))
    for i, blk in enumerate(blocks):
        if blk is None:
            continue
        Aeq = np.vstack([blk.generators, blk.A])
        beq = np.concatenate([X[i] - blk.center, blk.b])
        out[i] = setalg.min_coefficient_norm(Aeq, beq)[0]
    return out


class _Problem:
    def __init__(self, model, x0, x_ref, u_ref, cfg, ubox, blocks, u_prev):
        self.model = model
        self.x0 = np.asarray(x0, dtype=float)
        self.x_ref = x_ref
        self.u_ref = u_ref
        self.cfg = cfg
        self.ubox = ubox
        self.blocks = blocks
        self.u_prev = None if u_prev is None else np.asarray(u_prev, dtype=float)
        self.N = cfg.horizon
        self.m = len(ubox.lower)
        self.n = len(self.x0)

    def evaluate(self, U):
        X, self.jac = _rollout(self.model, self.x0, U, self.cfg.sampling_time)
        cost = tracking_cost(X[1:], U, self.x_ref, self.u_ref, self.cfg)
        viol = 0.0
        if any(b is not None for b in self.blocks):
            viol = _violation(self.blocks, X[1:])
        return X, cost, viol

    def project(self, U):
        """Clip a warm start into the input and rate bounds."""
        U = np.clip(U, self.ubox.lower, self.ubox.upper)
        du = self.cfg.du_max
        if du is not None:
            prev = self.u_prev
            for j in range(U.shape[0]):
                if prev is not None:
                    U[j] = np.clip(U[j], prev - du, prev + du)
                prev = U[j]
        return U

    def _rate_rows(self, U):
        """Difference operator rows and current differences for the rate bounds."""
        N, m = U.shape
        D = np.eye(N * m) - np.eye(N * m, k=-m)
        diff = np.diff(U, axis=0, prepend=U[:1] if self.u_prev is None else self.u_prev[None, :]).reshape(-1)
        if self.u_prev is None:
            D = D[m:]
            diff = diff[m:]
        return D, diff

    def qp(self, X, U, radius, rho, jac=None):
        """Convex subproblem in (du, xi blocks, sigma); returns (dU, model merit, sigma) or None."""
        N, n, m, cfg = self.N, self.n, self.m, self.cfg
        S = _sensitivities(self.model, X, U, cfg.sampling_time, jac)
        nu = N * m
        blocks = [(j, b) for j, b in enumerate(self.blocks) if b is not None]
        p_tot = sum(b.n_lifted for _, b in blocks)
        use_sigma = bool(blocks)
        nv = nu + p_tot + int(use_sigma)

        Sf = S.reshape(N * n, nu)
        QS = np.einsum("ij,kjl->kil", cfg.Q, S).reshape(N * n, nu)
        ex = (X[1:] - self.x_ref).reshape(-1)
        eu = (U - self.u_ref).reshape(-1)
        Rb = np.kron(np.eye(N), cfg.R)
        Puu = 2.0 * (Sf.T @ QS + Rb)
        q = np.zeros(nv)
        q[:nu] = 2.0 * (QS.T @ ex + Rb @ eu)
        if use_sigma:
            q[-1] = rho
        const = tracking_cost(X[1:], U, self.x_ref, self.u_ref, cfg)
        P = sparse.block_diag([sparse.csc_matrix(np.triu(Puu)), sparse.csc_matrix((nv - nu, nv - nu))],
                              format="csc")

        eq_rows, eq_rhs, in_rows, in_rhs = [], [], [], []
        if blocks:
            # S_j du - G_j xi_j = c_j - x_j ;  A_j xi_j = b_j
            left = np.vstack([np.vstack([S[j], np.zeros((b.A.shape[0], nu))]) for j, b in blocks])
            lifted = sparse.block_diag([np.vstack([-b.generators, b.A]) for _, b in blocks])
            eq_rows.append(sparse.hstack([sparse.csr_matrix(left), lifted, sparse.csr_matrix((left.shape[0], 1))]))
            eq_rhs.append(np.concatenate([np.concatenate([b.center - X[j + 1], b.b]) for j, b in blocks]))
            # |xi| <= 1 + sigma, sigma >= 0
            I = sparse.identity(p_tot)
            col = -np.ones((p_tot, 1))
            zero = sparse.csr_matrix((p_tot, nu))
            in_rows.append(sparse.bmat([[zero, I, col], [zero, -I, col]]))
            in_rhs.append(np.ones(2 * p_tot))
            sig = sparse.csr_matrix(([-1.0], ([0], [nv - 1])), shape=(1, nv))
            in_rows.append(sig)
            in_rhs.append(np.zeros(1))
        # input bounds intersected with the trust region
        lo = np.maximum(np.tile(self.ubox.lower, N) - U.reshape(-1), -radius)
        hi = np.minimum(np.tile(self.ubox.upper, N) - U.reshape(-1), radius)
        pad = sparse.csr_matrix((nu, nv - nu))
        Iu = sparse.identity(nu)
        in_rows.append(sparse.bmat([[Iu, pad], [-Iu, pad]]))
        in_rhs.append(np.concatenate([hi, -lo]))
        if cfg.du_max is not None:
            D, diff = self._rate_rows(U)
            du = np.tile(cfg.du_max, N)[-D.shape[0]:] if D.shape[0] else np.zeros(0)
            padD = sparse.csr_matrix((D.shape[0], nv - nu))
            in_rows.append(sparse.bmat([[sparse.csr_matrix(D), padD], [sparse.csr_matrix(-D), padD]]))
            in_rhs.append(np.concatenate([du - diff, du + diff]))

        cones = []
        n_eq = sum(r.shape[0] for r in eq_rows)
        if n_eq:
            cones.append(clarabel.ZeroConeT(n_eq))
        Ain = sparse.vstack(in_rows)
        cones.append(clarabel.NonnegativeConeT(Ain.shape[0]))
        Am = sparse.vstack(eq_rows + [Ain], format="csc")
        rhs = np.concatenate(eq_rhs + in_rhs)
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.tol_gap_abs = 1e-10
        settings.tol_gap_rel = 1e-10
        settings.tol_feas = 1e-10
        settings.max_iter = 200
        sol = clarabel.DefaultSolver(P, q, Am, rhs, cones, settings).solve()
        if "Solved" not in str(sol.status):
            log.debug("QP status %s", sol.status)
            return None
        v = np.asarray(sol.x)
        dv = v[:nu]
        dU = dv.reshape(N, m)
        sigma = float(max(v[-1], 0.0)) if use_sigma else 0.0
        model_merit = float(0.5 * dv @ Puu @ dv + q[:nu] @ dv) + const + rho * sigma
        return dU, model_merit, sigma


def solve_ocp(
    x0,
    refs: ReferenceTrajectory,
    tube: ReachTube | None,
    cfg: MpcConfig,
    input_set,
    k: int = 0,
    model=None,
    u_init=None,
    u_prev=None,
    branch: str | None = None,
) -> MpcSolution:
    """One receding-horizon problem starting at sample ``k``.

    ``tube=None`` drops the membership constraints.  Predicted state ``j``
    is constrained to the tube set of sample ``k + j + 1`` (see `sample_set`).
    """
    model = EntryModel() if model is None else model
    ubox = _input_box(input_set)
    N = cfg.horizon
    x_ref, u_ref = refs.window(k, N)
    x0 = np.asarray(x0, dtype=float)
    status_prefix = ""
    blocks = [None] * N
    if tube is not None:
        Ts = cfg.sampling_time
        k0 = tube_position(tube, Ts, k)[0]
        try:
            br = branch or _branch_for(tube, k0, x0, lambda leaf: sample_set(tube, Ts, k, leaf))
        except TubeInfeasible:
            br = branch or tube.leaves[0]
            status_prefix = "outside_tube"
        blocks = []
        for j in range(N):
            z = setalg.as_cz(sample_set(tube, Ts, k + j + 1, br))
            blocks.append(MembershipBlock(z.center, z.generators, z.A, z.b, br, tube_position(tube, Ts, k + j + 1)[0]))
        if not status_prefix and not setalg.contains_point(sample_set(tube, Ts, k, br), x0, 1e-6):
            status_prefix = "outside_tube"

    U = np.repeat(u_ref[:1], N, axis=0) if u_init is None else np.array(u_init, dtype=float)
    prob = _Problem(model, x0, x_ref, u_ref, cfg, ubox, blocks, u_prev)
    U = prob.project(U)
    X, cost, viol = prob.evaluate(U)
    jac = prob.jac
    rho = cfg.penalty * (1.0 + cost)
    merit = cost + rho * viol
    radius = cfg.trust_radius
    best = (U, X, cost, viol) if viol <= cfg.tol_con else None
    it = 0
    converged = stalled = False
    for it in range(1, cfg.max_iterations + 1):
        out = prob.qp(X, U, radius, rho, jac)
        if out is None:
            radius *= 0.25
            if radius < 1e-12:
                break
            continue
        dU, model_merit, _ = out
        pred = merit - model_merit
        step = float(np.max(np.abs(dU))) if dU.size else 0.0
        log.debug("it %d merit %.9g pred %.3g step %.3g radius %.3g", it, merit, pred, step, radius)
        if step <= cfg.tol_stationarity or pred <= 1e-12 * (1.0 + abs(merit)):
            converged = True
            break
        U_new = prob.project(U + dU)
        X_new, cost_new, viol_new = prob.evaluate(U_new)
        jac_new = prob.jac
        merit_new = cost_new + rho * viol_new
        actual = merit - merit_new
        if actual >= 0.1 * pred:
            U, X, cost, viol, merit, jac = U_new, X_new, cost_new, viol_new, merit_new, jac_new
            stalled = actual <= cfg.tol_progress * (1.0 + abs(merit))
            if actual >= 0.75 * pred and step >= 0.99 * radius:
                radius *= 2.0
            if viol <= cfg.tol_con and (best is None or cost < best[2]):
                best = (U, X, cost, viol)
            if stalled:
                break
        else:
            radius = 0.25 * step
            if radius < 1e-14:
                break

    if best is None:
        status = "infeasible"
        U_out, X_out, c_out, v_out = U, X, cost, viol
    else:
        U_out, X_out, c_out, v_out = best
        status = "max_iter"
        if best[0] is U and (converged or stalled):
            status = "optimal" if converged else "stalled"
    if status_prefix and status != "optimal":
        status = status_prefix
    defect = float(np.max(np.abs(X_out[1:] - _rollout(model, x0, U_out, cfg.sampling_time)[0][1:])))
    active = _active_report(U_out, ubox, cfg, u_prev, blocks, X_out)
    return MpcSolution(U_out, X_out, c_out, status, it, v_out, defect, active)


def _active_report(U, ubox, cfg, u_prev, blocks, X, tol=1e-7):
    at_lo = np.isclose(U, ubox.lower, atol=tol, rtol=0)
    at_hi = np.isclose(U, ubox.upper, atol=tol, rtol=0)
    rep = {"input_lower": int(at_lo.sum()), "input_upper": int(at_hi.sum())}
    if cfg.du_max is not None:
        prev = np.vstack([U[:1] if u_prev is None else np.asarray(u_prev)[None, :], U[:-1]])
        rep["rate"] = int(np.sum(np.abs(U - prev) >= cfg.du_max - tol))
    if any(b is not None for b in blocks):
        rep["tube"] = [j for j, mg in enumerate(_margins(blocks, X[1:])) if mg >= 1.0 - 1e-6]
    return rep


# ---------------------------------------------------------------------------
# closed loop


@dataclass
class ClosedLoopLog:
    t: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    cost: np.ndarray
    qdot: np.ndarray
    tube_slack: np.ndarray
    status: list
    held: np.ndarray

    CSV_HEADER = ("t", "h", "v", "gamma", "theta", "psi", "phi", "alpha", "beta",
                  "J", "Qdot", "tube_slack", "solver_status")

    def rows(self):
        for i in range(len(self.t)):
            u = self.inputs[i] if i < len(self.inputs) else np.full(self.inputs.shape[1], np.nan)
            j = self.cost[i] if i < len(self.cost) else math.nan
            st = self.status[i] if i < len(self.status) else ""
            yield [float(self.t[i]), *map(float, self.states[i]), *map(float, u), float(j),
                   float(self.qdot[i]), float(self.tube_slack[i]), st]


def reference_from_tube(tube: ReachTube, input_set, leaf: str | None = None,
                        sampling_time: float | None = None) -> ReferenceTrajectory:
    """Tube centres as the state reference; the input-box midpoint as u_ref.

    With ``sampling_time`` the centres are resampled onto the controller
    grid, linearly between step boundaries.
    """
    if not tube.steps:
        raise ValueError("tube has no steps")
    leaf = tube.leaves[0] if leaf is None else leaf
    x_ref = tube.centers(leaf)
    if sampling_time is not None:
        t_tube = np.arange(len(x_ref)) * tube.time_step
        n = int(round(t_tube[-1] / sampling_time))
        t = np.arange(n + 1) * sampling_time
        x_ref = np.column_stack([np.interp(t, t_tube, col) for col in x_ref.T])
    u_mid = _input_box(input_set).center
    return ReferenceTrajectory(x_ref, np.repeat(u_mid[None, :], len(x_ref), axis=0))


def rk4_plant(model=None, substeps: int = 10) -> Callable:
    model = EntryModel() if model is None else model

    def step(x, u, Ts):
        h = Ts / substeps
        x = np.asarray(x, dtype=float)
        for _ in range(substeps):
            k1 = model.rates(x, u)
            k2 = model.rates(x + 0.5 * h * k1, u)
            k3 = model.rates(x + 0.5 * h * k2, u)
            k4 = model.rates(x + h * k3, u)
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return x

    return step


def euler_plant(model=None) -> Callable:
    model = EntryModel() if model is None else model

    def step(x, u, Ts):
        return np.asarray(x, dtype=float) + Ts * np.asarray(model.rates(x, u), dtype=float)

    return step


def mpc_loop(
    x0,
    tube: ReachTube | None,
    refs: ReferenceTrajectory,
    cfg: MpcConfig,
    input_set,
    n_steps: int,
    plant: Callable | None = None,
    model=None,
    heat: Callable | None = None,
    constraint_tube: bool = True,
) -> ClosedLoopLog:
    """Closed-loop receding-horizon simulation for ``n_steps`` samples.

    ``tube`` is always used for the logged slack; ``constraint_tube=False``
    leaves it out of the optimisation.  When a solve fails the last applied
    input is held and the sample is flagged.
    """
    model = EntryModel() if model is None else model
    if plant is None:
        plant = rk4_plant(model, cfg.plant_substeps) if cfg.plant == "rk4" else euler_plant(model)
    ubox = _input_box(input_set)
    Ts = cfg.sampling_time
    X = [np.asarray(x0, dtype=float)]
    Us, Js, status, held = [], [], [], []
    u_last = None
    guess = None
    for k in range(n_steps):
        sol = solve_ocp(X[-1], refs, tube if constraint_tube else None, cfg, ubox, k=k, model=model,
                        u_init=guess, u_prev=u_last)
        if sol.ok or u_last is None:
            u = sol.inputs[0]
            hold = not sol.ok
            guess = np.vstack([sol.inputs[1:], sol.inputs[-1:]])
        else:
            u = u_last
            hold = True
            guess = None
        if hold:
            log.warning("MPC step %d: solver status %s, holding input", k, sol.status)
        Us.append(u)
        Js.append(sol.cost)
        status.append(sol.status)
        held.append(hold)
        u_last = u
        X.append(np.asarray(plant(X[-1], u, Ts), dtype=float))
    X = np.array(X)
    t = np.arange(n_steps + 1) * Ts
    qdot = np.array([heat(x) for x in X]) if heat is not None else np.full(len(X), np.nan)
    slack = np.full(len(X), np.nan)
    if tube is not None:
        for i, x in enumerate(X):
            if tube_position(tube, Ts, i)[0] > tube.n_steps:
                break
            sets = [sample_set(tube, Ts, i, leaf) for leaf in tube.leaves]
            slack[i] = 1.0 - min(setalg.membership_margin(z, x, 1e-9) for z in sets)
    return ClosedLoopLog(t, X, np.array(Us), np.array(Js), qdot, slack, status, np.array(held))
