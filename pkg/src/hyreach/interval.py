"""Interval arithmetic with outward rounding, and second-order interval jets.

`Interval` wraps elementwise ``lo``/``hi`` numpy arrays.  Every operation
widens its result by at least one ulp in each direction so the enclosure
survives round-to-nearest.  Transcendental functions get a few extra ulps
plus an absolute floor, since libm is not correctly rounded.

`Jet` carries a value, gradient and Hessian, each as an `Interval`.  Evaluating
a function on jets seeded over a box yields an enclosure of every second
derivative over that box, which is what the linearization-error bound needs.
"""

from __future__ import annotations

import math

import numpy as np

_EPS = np.finfo(float).eps
_TRANS_REL = 8 * _EPS
_TRANS_ABS = 1e-300


def _down(x):
    return np.nextafter(x, -np.inf)


def _up(x):
    return np.nextafter(x, np.inf)


def _as_interval(x) -> "Interval":
    if isinstance(x, Interval):
        return x
    if isinstance(x, Jet):
        raise TypeError("mix jets with jets or plain numbers, not raw intervals")
    a = np.asarray(x, dtype=float)
    return Interval(a, a)


class Interval:
    __slots__ = ("lo", "hi")
    __array_priority__ = 1000

    def __init__(self, lo, hi=None):
        lo = np.asarray(lo, dtype=float)
        hi = lo if hi is None else np.asarray(hi, dtype=float)
        if np.any(lo > hi):
            raise ValueError("interval lower bound exceeds upper bound")
        self.lo = lo
        self.hi = hi

    @classmethod
    def hull_of(cls, lo, hi) -> "Interval":
        return cls(np.minimum(lo, hi), np.maximum(lo, hi))

    @property
    def shape(self):
        return self.lo.shape

    @property
    def mid(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def rad(self):
        return 0.5 * (self.hi - self.lo)

    def mag(self):
        """Elementwise max |x| over the interval."""
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.lo <= x) and np.all(x <= self.hi))

    def subset_of(self, other: "Interval") -> bool:
        return bool(np.all(other.lo <= self.lo) and np.all(self.hi <= other.hi))

    def __getitem__(self, idx):
        return Interval(self.lo[idx], self.hi[idx])

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"

    # -- arithmetic ---------------------------------------------------------
    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __add__(self, other):
        o = _as_interval(other)
        return Interval(_down(self.lo + o.lo), _up(self.hi + o.hi))

    __radd__ = __add__

    def __sub__(self, other):
        o = _as_interval(other)
        return Interval(_down(self.lo - o.hi), _up(self.hi - o.lo))

    def __rsub__(self, other):
        return _as_interval(other) - self

    def __mul__(self, other):
        o = _as_interval(other)
        p1 = self.lo * o.lo
        p2 = self.lo * o.hi
        p3 = self.hi * o.lo
        p4 = self.hi * o.hi
        lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4))
        hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4))
        return Interval(_down(lo), _up(hi))

    __rmul__ = __mul__

    def reciprocal(self):
        if np.any((self.lo <= 0) & (self.hi >= 0)):
            raise ZeroDivisionError("interval reciprocal of a range containing zero")
        with np.errstate(over="ignore"):  # an infinite bound is still an enclosure
            return Interval(_down(1.0 / self.hi), _up(1.0 / self.lo))

    def __truediv__(self, other):
        return self * _as_interval(other).reciprocal()

    def __rtruediv__(self, other):
        return _as_interval(other) * self.reciprocal()

    def sqr(self):
        lo2 = self.lo * self.lo
        hi2 = self.hi * self.hi
        straddle = (self.lo <= 0) & (self.hi >= 0)
        lo = np.where(straddle, 0.0, np.minimum(lo2, hi2))
        hi = np.maximum(lo2, hi2)
        return Interval(np.maximum(_down(lo), 0.0), _up(hi))

    def __pow__(self, k):
        if k == 2:
            return self.sqr()
        if k == 3:
            return self * self.sqr()
        raise NotImplementedError("only squares and cubes are supported")

    def dot(self, other: "Interval") -> "Interval":
        """Interval inner product over the last axis."""
        prod = self * other
        lo = np.sum(prod.lo, axis=-1)
        hi = np.sum(prod.hi, axis=-1)
        n = prod.lo.shape[-1]
        # summation error: n ulps of the magnitude
        slack = n * _EPS * np.sum(np.maximum(np.abs(prod.lo), np.abs(prod.hi)), axis=-1)
        return Interval(_down(lo - slack), _up(hi + slack))


def _widen_trans(lo, hi):
    return (
        _down(lo - _TRANS_REL * np.abs(lo) - _TRANS_ABS),
        _up(hi + _TRANS_REL * np.abs(hi) + _TRANS_ABS),
    )


def iexp(x: Interval) -> Interval:
    lo, hi = _widen_trans(np.exp(x.lo), np.exp(x.hi))
    return Interval(np.maximum(lo, 0.0), hi)


def isin(x: Interval) -> Interval:
    lo, hi = x.lo, x.hi
    s_lo, s_hi = np.sin(lo), np.sin(hi)
    out_lo = np.minimum(s_lo, s_hi)
    out_hi = np.maximum(s_lo, s_hi)
    # maxima at pi/2 + 2k pi, minima at -pi/2 + 2k pi
    two_pi = 2 * math.pi
    k_max = np.ceil((lo - math.pi / 2) / two_pi)
    has_max = math.pi / 2 + k_max * two_pi <= hi + 1e-15
    k_min = np.ceil((lo + math.pi / 2) / two_pi)
    has_min = -math.pi / 2 + k_min * two_pi <= hi + 1e-15
    out_hi = np.where(has_max, 1.0, out_hi)
    out_lo = np.where(has_min, -1.0, out_lo)
    wide = (hi - lo) >= two_pi
    out_hi = np.where(wide, 1.0, out_hi)
    out_lo = np.where(wide, -1.0, out_lo)
    lo_w, hi_w = _widen_trans(out_lo, out_hi)
    lo_w = lo_w - 4 * _EPS
    hi_w = hi_w + 4 * _EPS
    return Interval(np.maximum(lo_w, -1.0), np.minimum(hi_w, 1.0))


def icos(x: Interval) -> Interval:
    shifted = Interval(_down(x.lo + math.pi / 2), _up(x.hi + math.pi / 2))
    return isin(shifted)


# ---------------------------------------------------------------------------
# second-order jets


class Jet:
    """Value, gradient and Hessian of a scalar function, all as intervals.

    Values may be batched: ``v`` has shape ``B``, ``g`` shape ``B + (d,)`` and
    ``H`` shape ``B + (d, d)``.  Plain floats give degenerate intervals, which
    is how the exact Hessian at a point is obtained for tests.
    """

    __slots__ = ("v", "g", "H")

    def __init__(self, v: Interval, g: Interval, H: Interval):
        self.v = v
        self.g = g
        self.H = H

    @classmethod
    def variable(cls, value: Interval, index: int, dim: int) -> "Jet":
        value = _as_interval(value)
        g = np.zeros(value.shape + (dim,))
        g[..., index] = 1.0
        z = np.zeros(value.shape + (dim, dim))
        return cls(value, Interval(g, g), Interval(z, z))

    @classmethod
    def constant(cls, value, dim: int) -> "Jet":
        z1 = np.zeros(dim)
        z2 = np.zeros((dim, dim))
        return cls(_as_interval(value), Interval(z1, z1), Interval(z2, z2))

    @property
    def dim(self):
        return self.g.lo.shape[-1]

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, self.dim)

    def __neg__(self):
        return Jet(-self.v, -self.g, -self.H)

    def __add__(self, other):
        o = self._lift(other)
        return Jet(self.v + o.v, self.g + o.g, self.H + o.H)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        return Jet(self.v - o.v, self.g - o.g, self.H - o.H)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = _as_interval(other)
            return Jet(self.v * c, self.g * _ex(c, 1), self.H * _ex(c, 2))
        o = other
        v = self.v * o.v
        g = self.g * _ex(o.v, 1) + o.g * _ex(self.v, 1)
        outer = _outer(self.g, o.g)
        H = self.H * _ex(o.v, 2) + o.H * _ex(self.v, 2) + outer + _transpose(outer)
        return Jet(v, g, H)

    __rmul__ = __mul__

    def _unary(self, f0: Interval, f1: Interval, f2: Interval) -> "Jet":
        # chain rule: H = f'' g g^T + f' H
        g = self.g * _ex(f1, 1)
        H = _outer(self.g, self.g) * _ex(f2, 2) + self.H * _ex(f1, 2)
        return Jet(f0, g, H)

    def reciprocal(self):
        r = self.v.reciprocal()
        r2 = r.sqr()
        return self._unary(r, -r2, r2 * r * 2.0)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * _as_interval(other).reciprocal()
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self._lift(other) * self.reciprocal()

    def sqr(self):
        return self * self

    def __pow__(self, k):
        if k == 2:
            return self.sqr()
        if k == 3:
            return self * self.sqr()
        raise NotImplementedError


def _ex(x: Interval, k: int) -> Interval:
    """Append ``k`` trailing unit axes so batch values broadcast over derivatives."""
    idx = (Ellipsis,) + (None,) * k
    return Interval(x.lo[idx], x.hi[idx])


def _outer(a: Interval, b: Interval) -> Interval:
    return _ex(a, 1) * Interval(b.lo[..., None, :], b.hi[..., None, :])


def _transpose(x: Interval) -> Interval:
    return Interval(np.swapaxes(x.lo, -1, -2), np.swapaxes(x.hi, -1, -2))


def jexp(x: Jet) -> Jet:
    e = iexp(x.v)
    return x._unary(e, e, e)


def jsin(x: Jet) -> Jet:
    s = isin(x.v)
    c = icos(x.v)
    return x._unary(s, c, -s)


def jcos(x: Jet) -> Jet:
    s = isin(x.v)
    c = icos(x.v)
    return x._unary(c, -s, -c)


class IntervalOps:
    """Math namespace for generic model code evaluated on intervals."""

    exp = staticmethod(iexp)
    sin = staticmethod(isin)
    cos = staticmethod(icos)


class JetOps:
    """Math namespace for generic model code evaluated on jets."""

    exp = staticmethod(jexp)
    sin = staticmethod(jsin)
    cos = staticmethod(jcos)
