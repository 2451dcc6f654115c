"""Zonotopes, constrained zonotopes and the set operations reachability needs.

A zonotope is ``{c + G xi : |xi|_inf <= 1}``; a constrained zonotope adds
``A xi = b``.  Values are immutable once built.  Linear programs go through
HiGHS (``scipy.optimize.linprog``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

SCHEMA_VERSION = 1
DEFAULT_TOL = 1e-9

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


def _linprog(*args, **kwargs):
    """HiGHS with tight tolerances; retry looser then with IPM on solver hiccups."""
    kwargs.pop("method", None)
    kwargs.pop("options", None)
    res = linprog(*args, method="highs", options=_HIGHS_OPTIONS, **kwargs)
    if res.status in (0, 2):
        return res
    for method in ("highs-ds", "highs-ipm"):
        res = linprog(*args, method=method, **kwargs)
        if res.status in (0, 2):
            return res
    return res


class EmptySetError(ValueError):
    pass


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("set data must be finite")


@dataclass(frozen=True)
class IntervalBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _frozen(np.atleast_1d(self.lower))
        hi = _frozen(np.atleast_1d(self.upper))
        if lo.shape != hi.shape:
            raise ValueError("bound shapes differ")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.shape[0]

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def radius(self):
        return 0.5 * (self.upper - self.lower)

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, x, tol=0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def to_zonotope(self) -> "Zonotope":
        return Zonotope(self.center, np.diag(self.radius))

    def to_dict(self):
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True)
class Halfspace:
    """``{x : normal . x <= offset}``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        a = _frozen(np.atleast_1d(self.normal))
        if not np.any(a != 0):
            raise ValueError("halfspace normal must be nonzero")
        _check_finite(a, np.array([self.offset]))
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self):
        return self.normal.shape[0]

    def contains(self, x, tol=0.0) -> bool:
        return bool(self.normal @ np.asarray(x, dtype=float) <= self.offset + tol)

    def normalized(self) -> "Halfspace":
        s = float(np.linalg.norm(self.normal))
        return Halfspace(self.normal / s, self.offset / s)

    def to_dict(self):
        return {"normal": self.normal.tolist(), "offset": self.offset}


class Zonotope:
    """Centrally symmetric set ``{c + G xi : |xi|_inf <= 1}``."""

    __slots__ = ("center", "generators")

    def __init__(self, center, generators=None):
        c = np.atleast_1d(np.asarray(center, dtype=float)).reshape(-1)
        n = c.shape[0]
        if generators is None:
            G = np.zeros((n, 0))
        else:
            G = np.asarray(generators, dtype=float)
            if G.ndim == 1 and n == 1:
                G = G.reshape(1, -1)
            if G.ndim != 2 or G.shape[0] != n:
                raise ValueError(f"generators must have {n} rows, got shape {G.shape}")
        _check_finite(c, G)
        self.center = _frozen(c)
        self.generators = _frozen(G)

    @classmethod
    def from_box(cls, lower, upper) -> "Zonotope":
        return IntervalBox(np.asarray(lower, float), np.asarray(upper, float)).to_zonotope()

    @classmethod
    def point(cls, x) -> "Zonotope":
        return cls(x)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def n_generators(self) -> int:
        return self.generators.shape[1]

    @property
    def order(self) -> float:
        return self.n_generators / self.dim

    def to_cz(self) -> "ConstrainedZonotope":
        return ConstrainedZonotope(self.center, self.generators)

    def __add__(self, other):
        return minkowski_sum(self, other)

    def __rmatmul__(self, M):
        return linear_map(M, self)

    def __repr__(self):
        return f"Zonotope(dim={self.dim}, generators={self.n_generators})"

    def to_dict(self):
        return set_to_dict(self)


class ConstrainedZonotope:
    """``{c + G xi : |xi|_inf <= 1, A xi = b}``."""

    __slots__ = ("center", "generators", "A", "b")

    def __init__(self, center, generators=None, A=None, b=None):
        z = Zonotope(center, generators)
        p = z.n_generators
        if A is None:
            A = np.zeros((0, p))
            b = np.zeros(0)
        A = np.asarray(A, dtype=float)
        if A.ndim == 1:
            A = A.reshape(1, -1) if A.size else np.zeros((0, p))
        b = np.atleast_1d(np.asarray(b, dtype=float)).reshape(-1)
        if A.shape[1] != p or A.shape[0] != b.shape[0]:
            raise ValueError(f"constraint shapes {A.shape}, {b.shape} do not match {p} generators")
        _check_finite(A, b)
        self.center = z.center
        self.generators = z.generators
        self.A = _frozen(A)
        self.b = _frozen(b)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def n_generators(self) -> int:
        return self.generators.shape[1]

    @property
    def n_constraints(self) -> int:
        return self.A.shape[0]

    @property
    def order(self) -> float:
        return self.n_generators / self.dim

    @property
    def is_zonotope(self) -> bool:
        return self.n_constraints == 0

    def zonotope_part(self) -> Zonotope:
        """The set with its equality constraints dropped (an outer bound)."""
        return Zonotope(self.center, self.generators)

    def to_cz(self) -> "ConstrainedZonotope":
        return self

    def compact(self, tol: float = 0.0) -> "ConstrainedZonotope":
        """Drop generator columns that are zero in both G and A, and empty rows."""
        G, A, b = self.generators, self.A, self.b
        keep_rows = np.any(np.abs(A) > tol, axis=1) | (np.abs(b) > tol)
        A, b = A[keep_rows], b[keep_rows]
        keep_cols = np.any(np.abs(G) > tol, axis=0) | np.any(np.abs(A) > tol, axis=0)
        return ConstrainedZonotope(self.center, G[:, keep_cols], A[:, keep_cols], b)

    def __add__(self, other):
        return minkowski_sum(self, other)

    def __rmatmul__(self, M):
        return linear_map(M, self)

    def __repr__(self):
        return (f"ConstrainedZonotope(dim={self.dim}, generators={self.n_generators}, "
                f"constraints={self.n_constraints})")

    def to_dict(self):
        return set_to_dict(self)


def as_cz(z) -> ConstrainedZonotope:
    return z.to_cz()


def _check_dims(a, b):
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


# ---------------------------------------------------------------------------
# exact operations


def minkowski_sum(a, b):
    _check_dims(a, b)
    c = a.center + b.center
    G = np.hstack([a.generators, b.generators])
    if isinstance(a, Zonotope) and isinstance(b, Zonotope):
        return Zonotope(c, G)
    a, b = as_cz(a), as_cz(b)
    A = np.block([
        [a.A, np.zeros((a.n_constraints, b.n_generators))],
        [np.zeros((b.n_constraints, a.n_generators)), b.A],
    ])
    return ConstrainedZonotope(c, G, A, np.concatenate([a.b, b.b]))


def linear_map(M, z):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != z.dim:
        raise ValueError(f"map has {M.shape[1]} columns, set has dimension {z.dim}")
    if isinstance(z, Zonotope):
        return Zonotope(M @ z.center, M @ z.generators)
    return ConstrainedZonotope(M @ z.center, M @ z.generators, z.A, z.b)


def translate(z, v):
    v = np.asarray(v, dtype=float)
    if isinstance(z, Zonotope):
        return Zonotope(z.center + v, z.generators)
    return ConstrainedZonotope(z.center + v, z.generators, z.A, z.b)


def support(z, direction) -> float:
    """Support function ``max_{x in z} d . x``.

    Closed form for zonotopes; a linear program for constrained zonotopes.
    """
    d = np.asarray(direction, dtype=float)
    if d.shape != (z.dim,):
        raise ValueError("direction has the wrong dimension")
    if not np.any(d != 0):
        raise ValueError("support direction must be nonzero")
    if isinstance(z, Zonotope) or z.is_zonotope:
        return float(d @ z.center + np.sum(np.abs(d @ z.generators)))
    val = _lp_extreme(z, d @ z.generators, maximize=True)
    return float(d @ z.center + val)


# ---------------------------------------------------------------------------
# linear programming helpers


def _scaled_rows(Aeq, beq, band=None):
    """Scale each equality row to unit max-norm; report rows that are 0 = nonzero.

    ``band`` is an optional per-row tolerance on the residual, scaled along.
    """
    s = np.max(np.abs(Aeq), axis=1) if Aeq.shape[1] else np.zeros(Aeq.shape[0])
    allow = DEFAULT_TOL * np.maximum(1.0, np.abs(beq)) if band is None else band
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        # rows too small to rescale act like zero rows that reach at most p*s
        zero = (s == 0) | ~np.isfinite(beq / s) | ~np.isfinite(allow / s)
    reach = s * Aeq.shape[1]
    bad = bool(np.any(np.abs(beq[zero]) > allow[zero] + reach[zero]))
    s = np.where(zero, 1.0, s)
    keep = ~zero
    if band is None:
        return Aeq[keep] / s[keep, None], beq[keep] / s[keep], bad
    return Aeq[keep] / s[keep, None], beq[keep] / s[keep], bad, band[keep] / s[keep]


def _lp_extreme(z: ConstrainedZonotope, cost, maximize: bool) -> float:
    """Extreme value of ``cost . xi`` over the feasible coefficient set."""
    A, b, bad = _scaled_rows(z.A, z.b)
    if bad:
        raise EmptySetError("constrained zonotope is empty")
    p = z.n_generators
    if p == 0:
        return 0.0
    sign = -1.0 if maximize else 1.0
    res = _linprog(
        sign * np.asarray(cost, dtype=float),
        A_eq=A if A.shape[0] else None,
        b_eq=b if A.shape[0] else None,
        bounds=[(-1.0, 1.0)] * p,
        method="highs",
        options=_HIGHS_OPTIONS,
    )
    if res.status == 2:
        raise EmptySetError("constrained zonotope is empty")
    if res.status != 0:
        raise RuntimeError(f"LP failed: {res.message}")
    return sign * res.fun


def min_coefficient_norm(Aeq, beq, band=None):
    """Smallest ``|xi|_inf`` with ``Aeq xi = beq``; inf when infeasible.

    With ``band`` the equalities only need to hold within that per-row
    tolerance.
    """
    Aeq = np.atleast_2d(np.asarray(Aeq, dtype=float))
    beq = np.asarray(beq, dtype=float).reshape(-1)
    p = Aeq.shape[1]
    if band is None:
        A, b, bad = _scaled_rows(Aeq, beq)
    else:
        A, b, bad, w = _scaled_rows(Aeq, beq, np.broadcast_to(np.asarray(band, dtype=float), beq.shape))
    if bad:
        return math.inf, None
    if A.shape[0] == 0:
        return 0.0, np.zeros(p)
    if p == 0:
        return 0.0, np.zeros(0)
    cost = np.zeros(p + 1)
    cost[-1] = 1.0
    eye = np.eye(p)
    A_ub = np.block([[eye, -np.ones((p, 1))], [-eye, -np.ones((p, 1))]])
    b_ub = np.zeros(2 * p)
    rows = np.hstack([A, np.zeros((A.shape[0], 1))])
    eq = {}
    if band is None:
        eq = {"A_eq": rows, "b_eq": b}
    else:
        A_ub = np.vstack([A_ub, rows, -rows])
        b_ub = np.concatenate([b_ub, b + w, w - b])
    res = _linprog(
        cost,
        A_ub=A_ub,
        b_ub=b_ub,
        **eq,
        bounds=[(None, None)] * p + [(0.0, None)],
        method="highs",
        options=_HIGHS_OPTIONS,
    )
    if res.status == 2:
        return math.inf, None
    if res.status != 0:
        raise RuntimeError(f"LP failed: {res.message}")
    return float(res.x[-1]), res.x[:p]


def is_empty(z, tol: float = DEFAULT_TOL) -> bool:
    if isinstance(z, Zonotope) or z.is_zonotope:
        return False
    t, _ = min_coefficient_norm(z.A, z.b)
    return t > 1.0 + tol


def membership_margin(z, x, tol: float = 0.0) -> float:
    """Smallest ``|xi|_inf`` representing x in z (inf if no representation).

    ``x`` belongs to ``z`` exactly when the result is at most 1.  A positive
    ``tol`` lets ``c + G xi`` miss x by ``tol * (1 + |x|)`` per axis and
    ``A xi`` miss b by ``tol * (1 + |b|)``.
    """
    z = as_cz(z)
    x = np.asarray(x, dtype=float)
    Aeq = np.vstack([z.generators, z.A])
    beq = np.concatenate([x - z.center, z.b])
    if tol <= 0:
        return min_coefficient_norm(Aeq, beq)[0]
    band = tol * (1.0 + np.concatenate([np.abs(x), np.abs(z.b)]))
    return min_coefficient_norm(Aeq, beq, band)[0]


def contains_point(z, x, slack: float = DEFAULT_TOL) -> bool:
    """Membership with ``|xi|_inf <= 1 + slack`` and equalities held to ``slack``."""
    if slack < 0:
        raise ValueError("slack must be nonnegative")
    x = np.asarray(x, dtype=float)
    if x.shape != (z.dim,):
        raise ValueError("point has the wrong dimension")
    zp = z if isinstance(z, Zonotope) else z.zonotope_part()
    rad = np.sum(np.abs(zp.generators), axis=1)
    if np.any(np.abs(x - zp.center) > rad * (1.0 + slack) + slack * (1.0 + np.abs(x))):
        return False
    return membership_margin(z, x, slack) <= 1.0 + slack


def interval_hull(z, use_lp: bool = True) -> IntervalBox:
    """Tightest axis-aligned box around z.

    Constrained zonotopes use 2n linear programs; with ``use_lp=False`` the
    constraints are ignored, which is looser but still an outer bound.
    """
    if isinstance(z, Zonotope) or z.is_zonotope or not use_lp:
        rad = np.sum(np.abs(z.generators), axis=1)
        return IntervalBox(z.center - rad, z.center + rad)
    lo = np.empty(z.dim)
    hi = np.empty(z.dim)
    for i in range(z.dim):
        gi = z.generators[i]
        lo[i] = z.center[i] + _lp_extreme(z, gi, maximize=False)
        hi[i] = z.center[i] + _lp_extreme(z, gi, maximize=True)
    return IntervalBox(np.minimum(lo, hi), np.maximum(lo, hi))


def intersect_halfspace(z, h: Halfspace) -> ConstrainedZonotope:
    """Exact intersection with ``{x : n . x <= f}``.

    A non-binding halfspace returns the input unchanged; otherwise one slack
    generator and one equality row are appended.
    """
    z = as_cz(z)
    if h.dim != z.dim:
        raise ValueError(f"dimension mismatch: {h.dim} vs {z.dim}")
    hG = h.normal @ z.generators
    sigma = float(np.sum(np.abs(hG)))
    d = h.offset - float(h.normal @ z.center)
    if sigma <= d:
        return z
    # negative s_max means the zonotope part lies wholly outside; clamping the
    # slack to zero then yields an infeasible (empty) representation
    s_max = max(d + sigma, 0.0)
    p, m = z.n_generators, z.n_constraints
    G = np.hstack([z.generators, np.zeros((z.dim, 1))])
    A = np.zeros((m + 1, p + 1))
    A[:m, :p] = z.A
    A[m, :p] = hG
    A[m, p] = 0.5 * s_max
    b = np.concatenate([z.b, [d - 0.5 * s_max]])
    return ConstrainedZonotope(z.center, G, A, b)


# ---------------------------------------------------------------------------
# order reduction


def _row_scales(M):
    s = np.sum(np.abs(M), axis=1)
    return np.where(s > 0, s, 1.0)


def _girard_boxing(G, keep: int):
    """Keep the ``keep`` best generators; enclose the rest in an axis box.

    Generators are ranked by |g|_1 - |g|_inf on rows normalised by their
    total extent, so mixed units do not decide the ranking.
    """
    Gn = G / _row_scales(G)[:, None]
    score = np.sum(np.abs(Gn), axis=0) - np.max(np.abs(Gn), axis=0)
    order = np.argsort(-score, kind="stable")
    kept = np.sort(order[:keep])
    rest = np.sort(order[keep:])
    box = np.diag(np.sum(np.abs(G[:, rest]), axis=1))
    return np.hstack([G[:, kept], box])


def _rescale(z: ConstrainedZonotope, sweeps: int = 2) -> ConstrainedZonotope:
    """Tighten coefficient bounds implied by the constraints (set unchanged)."""
    A, b = z.A, z.b
    p = z.n_generators
    lo = -np.ones(p)
    hi = np.ones(p)
    for _ in range(sweeps):
        for i in range(A.shape[0]):
            a = A[i]
            for j in np.nonzero(np.abs(a) > 1e-12 * np.max(np.abs(a)))[0]:
                others_lo = np.delete(np.minimum(a * lo, a * hi), j).sum()
                others_hi = np.delete(np.maximum(a * lo, a * hi), j).sum()
                r_lo = (b[i] - others_hi) / a[j]
                r_hi = (b[i] - others_lo) / a[j]
                r_lo, r_hi = min(r_lo, r_hi), max(r_lo, r_hi)
                lo[j] = max(lo[j], r_lo)
                hi[j] = min(hi[j], r_hi)
    if np.any(lo > hi + 1e-12):
        return z
    hi = np.maximum(hi, lo)
    # guard against roundoff pulling an implied bound inward
    lo = np.maximum(lo - 1e-12, -1.0)
    hi = np.minimum(hi + 1e-12, 1.0)
    mid = 0.5 * (lo + hi)
    rad = 0.5 * (hi - lo)
    c = z.center + z.generators @ mid
    G = z.generators * rad
    b2 = b - A @ mid
    A2 = A * rad
    return ConstrainedZonotope(c, G, A2, b2)


def _eliminate_one(z: ConstrainedZonotope) -> ConstrainedZonotope:
    """Remove one constraint and one coefficient (outer approximation).

    The pair is chosen to minimise the bound violation of the eliminated
    coefficient times its normalised lifted column; exact when the
    coefficient's implied range already lies inside [-1, 1].
    """
    A, b, G = z.A, z.b, z.generators
    rs = np.max(np.abs(A), axis=1)
    rs = np.where(rs > 0, rs, 1.0)
    An = A / rs[:, None]
    bn = b / rs
    Gn = G / _row_scales(G)[:, None]
    colnorm = np.sqrt(np.sum(Gn * Gn, axis=0) + np.sum(An * An, axis=0))
    best = None
    for i in range(An.shape[0]):
        row_abs = np.abs(An[i])
        total = row_abs.sum()
        for j in np.nonzero(row_abs > 1e-6)[0]:
            rad = (total - row_abs[j]) / row_abs[j]
            excess = max(0.0, abs(bn[i] / An[i, j]) + rad - 1.0)
            score = excess * colnorm[j]
            key = (score, -row_abs[j], i, j)
            if best is None or key < best:
                best = key
    if best is None:
        # every row is numerically zero: constraints are trivial
        return ConstrainedZonotope(z.center, G, np.zeros((0, G.shape[1])), np.zeros(0))
    _, _, i, j = best
    a_i = An[i]
    piv = a_i[j]
    c = z.center + G[:, j] * bn[i] / piv
    G2 = G - np.outer(G[:, j], a_i) / piv
    A2 = An - np.outer(An[:, j], a_i) / piv
    b2 = bn - An[:, j] * bn[i] / piv
    G2 = np.delete(G2, j, axis=1)
    A2 = np.delete(np.delete(A2, i, axis=0), j, axis=1)
    b2 = np.delete(b2, i)
    return ConstrainedZonotope(c, G2, A2, b2)


def reduce_order(z, max_order: float, max_constraints: int | None = None):
    """Outer-approximate z with at most ``max_order * n`` generators.

    Zonotopes: Girard boxing.  Constrained zonotopes: rescale, eliminate
    constraints down to ``max_constraints`` (default n), then box generators
    of the lifted matrix ``[G; A]`` so the constraints stay consistent.
    """
    if max_order < 1:
        raise ValueError("max_order must be at least 1")
    n = z.dim
    p_max = int(math.floor(max_order * n + 1e-9))
    if isinstance(z, Zonotope):
        if z.n_generators <= p_max:
            return z
        return Zonotope(z.center, _girard_boxing(z.generators, p_max - n))
    m_cap = n if max_constraints is None else int(max_constraints)
    m_cap = max(0, min(m_cap, p_max - n))
    if z.n_generators <= p_max and z.n_constraints <= m_cap:
        return z
    if z.is_zonotope:
        zz = reduce_order(z.zonotope_part(), max_order)
        return ConstrainedZonotope(zz.center, zz.generators)
    z = z.compact()
    if z.n_constraints:
        z = _rescale(z)
    while z.n_constraints > m_cap:
        z = _eliminate_one(z)
    if z.n_generators <= p_max:
        return z
    m = z.n_constraints
    lifted = np.vstack([z.generators, z.A])
    red = _girard_boxing(lifted, p_max - (n + m))
    return ConstrainedZonotope(z.center, red[:n], red[n:], z.b)


# ---------------------------------------------------------------------------
# splitting, sampling, projection


def split(z, axis_index: int):
    """Halve the generator contributing most along ``axis_index``.

    The two children partition the coefficient range of that generator, so
    their union is exactly the parent.
    """
    if not 0 <= axis_index < z.dim:
        raise ValueError(f"axis {axis_index} out of range for dimension {z.dim}")
    G = z.generators
    if G.shape[1] == 0 or not np.any(G[axis_index] != 0):
        return z, z
    j = int(np.argmax(np.abs(G[axis_index])))
    g = G[:, j]
    G2 = G.copy()
    G2[:, j] = 0.5 * g
    if isinstance(z, Zonotope):
        return Zonotope(z.center - 0.5 * g, G2), Zonotope(z.center + 0.5 * g, G2)
    a = z.A[:, j]
    A2 = z.A.copy()
    A2[:, j] = 0.5 * a
    return (
        ConstrainedZonotope(z.center - 0.5 * g, G2, A2, z.b + 0.5 * a),
        ConstrainedZonotope(z.center + 0.5 * g, G2, A2, z.b - 0.5 * a),
    )


def sample_coefficients(z, n: int, rng: np.random.Generator, max_batches: int = 1000):
    """Uniform samples of feasible coefficient vectors xi (shape (n, p))."""
    p = z.n_generators
    if isinstance(z, Zonotope) or z.is_zonotope:
        return rng.uniform(-1.0, 1.0, size=(n, p))
    _, xi0 = min_coefficient_norm(z.A, z.b)
    if xi0 is None or np.max(np.abs(xi0)) > 1.0 + DEFAULT_TOL:
        raise EmptySetError("cannot sample an empty set")
    N = null_space(z.A)
    k = N.shape[1]
    if k == 0:
        return np.tile(xi0, (n, 1))
    # bounding box of the null-space coordinates
    w_lo = np.empty(k)
    w_hi = np.empty(k)
    A_ub = np.vstack([N, -N])
    b_ub = np.concatenate([1.0 - xi0, 1.0 + xi0])
    for i in range(k):
        e = np.zeros(k)
        e[i] = 1.0
        lo = _linprog(e, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * k, method="highs")
        hi = _linprog(-e, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * k, method="highs")
        w_lo[i], w_hi[i] = lo.x[i], hi.x[i]
    out = []
    count = 0
    for _ in range(max_batches):
        w = rng.uniform(w_lo, w_hi, size=(max(4 * n, 64), k))
        xi = xi0 + w @ N.T
        ok = np.all(np.abs(xi) <= 1.0, axis=1)
        out.append(xi[ok])
        count += int(ok.sum())
        if count >= n:
            break
    xi = np.vstack(out)
    if xi.shape[0] < n:
        raise RuntimeError("rejection sampling of the constrained zonotope stalled")
    return xi[:n]


def sample_points(z, n: int, rng: np.random.Generator):
    xi = sample_coefficients(z, n, rng)
    return z.center + xi @ z.generators.T


def _zonogon(c2, G2):
    G2 = G2[:, np.any(G2 != 0, axis=0)]
    if G2.shape[1] == 0:
        return c2[None, :].copy()
    flip = (G2[1] < 0) | ((G2[1] == 0) & (G2[0] < 0))
    G2 = np.where(flip, -G2, G2)
    ang = np.arctan2(G2[1], G2[0])
    G2 = G2[:, np.argsort(ang, kind="stable")]
    v = c2 - G2.sum(axis=1)
    verts = [v]
    for g in list(G2.T) + list((-G2).T):
        v = v + 2.0 * g
        verts.append(v)
    return np.array(verts[:-1])


def _outer_polygon(z2, k: int):
    theta = 2.0 * np.pi * np.arange(k) / k
    D = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    hvals = np.array([support(z2, d) for d in D])
    verts = []
    for i in range(k):
        j = (i + 1) % k
        M = np.vstack([D[i], D[j]])
        verts.append(np.linalg.solve(M, [hvals[i], hvals[j]]))
    return np.array(verts)


def _support_point(z2: ConstrainedZonotope, d):
    A, b, _ = _scaled_rows(z2.A, z2.b)
    res = _linprog(
        -(d @ z2.generators),
        A_eq=A if A.shape[0] else None,
        b_eq=b if A.shape[0] else None,
        bounds=[(-1.0, 1.0)] * z2.n_generators,
        method="highs",
        options=_HIGHS_OPTIONS,
    )
    if res.status != 0:
        raise EmptySetError("set is empty")
    return z2.center + z2.generators @ res.x


def _exact_cz_polygon(z2: ConstrainedZonotope, tol=1e-9):
    if z2.n_generators == 0:
        return z2.center[None, :].copy()
    dirs = [np.array([1.0, 0]), np.array([0, 1.0]), np.array([-1.0, 0]), np.array([0, -1.0])]
    pts = [_support_point(z2, d) for d in dirs]
    scale = max(1.0, float(np.max(np.abs(pts))))
    for _ in range(200):
        P = _dedupe_ccw(np.array(pts), tol * scale)
        if P.shape[0] == 2:
            # axis probes can all land on one diagonal; look off both sides
            e = P[1] - P[0]
            off = [q for q in (_support_point(z2, np.array([e[1], -e[0]])), _support_point(z2, np.array([-e[1], e[0]])))
                   if abs(e[1] * (q - P[0])[0] - e[0] * (q - P[0])[1]) > tol * scale * np.linalg.norm(e)]
            if not off:
                return P
            pts.extend(off)
            continue
        if P.shape[0] < 3:
            return P
        added = False
        for i in range(P.shape[0]):
            a, b2 = P[i], P[(i + 1) % P.shape[0]]
            e = b2 - a
            nrm = np.array([e[1], -e[0]])
            if not np.any(nrm):
                continue
            q = _support_point(z2, nrm)
            if nrm @ q > nrm @ a + tol * scale * np.linalg.norm(nrm):
                pts.append(q)
                added = True
        if not added:
            return P
    return _dedupe_ccw(np.array(pts), tol * scale)


def _dedupe_ccw(P, tol):
    keep = []
    for p in P:
        if not any(np.linalg.norm(p - q) <= tol for q in keep):
            keep.append(p)
    P = np.array(keep)
    if P.shape[0] < 3:
        return P
    c = P.mean(axis=0)
    ang = np.arctan2(P[:, 1] - c[1], P[:, 0] - c[0])
    return P[np.argsort(ang, kind="stable")]


def project_vertices_2d(z, dims, enumeration_cap: int = 20, n_directions: int = 64):
    """Counter-clockwise outline of the projection onto ``dims``.

    Exact when the generator count is within ``enumeration_cap``; otherwise
    an outer polygon from support values in ``n_directions`` directions.
    """
    i, j = dims
    if i == j or not (0 <= i < z.dim and 0 <= j < z.dim):
        raise ValueError("dims must be two distinct valid axes")
    P = np.zeros((2, z.dim))
    P[0, i] = 1.0
    P[1, j] = 1.0
    z2 = linear_map(P, z)
    if not isinstance(z2, Zonotope) and z2.is_zonotope:
        z2 = z2.zonotope_part()
    if not isinstance(z2, Zonotope) and is_empty(z2):
        raise EmptySetError("cannot project an empty set")
    if z2.n_generators == 0:
        return z2.center[None, :].copy()
    if z2.n_generators <= enumeration_cap:
        if isinstance(z2, Zonotope):
            return _zonogon(z2.center, z2.generators)
        return _exact_cz_polygon(z2)
    return _outer_polygon(z2, n_directions)


def polygon_area(P) -> float:
    P = np.asarray(P, dtype=float)
    if P.shape[0] < 3:
        return 0.0
    x, y = P[:, 0], P[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


# ---------------------------------------------------------------------------
# serialization


def set_to_dict(z) -> dict:
    cz = as_cz(z)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "zonotope" if isinstance(z, Zonotope) else "constrained_zonotope",
        "dim": cz.dim,
        "n_generators": cz.n_generators,
        "n_constraints": cz.n_constraints,
        "center": cz.center.tolist(),
        "generators": cz.generators.T.tolist(),
        "A": cz.A.tolist(),
        "b": cz.b.tolist(),
    }


def set_from_dict(d: dict):
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported set schema version {d.get('schema_version')!r}")
    n, p, m = d["dim"], d["n_generators"], d["n_constraints"]
    G = np.array(d["generators"], dtype=float).reshape(p, n).T
    c = np.array(d["center"], dtype=float)
    if d["kind"] == "zonotope":
        return Zonotope(c, G)
    A = np.array(d["A"], dtype=float).reshape(m, p)
    return ConstrainedZonotope(c, G, A, np.array(d["b"], dtype=float).reshape(m))
