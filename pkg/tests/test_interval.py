import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyreach.interval import Interval, Jet, icos, iexp, isin, jcos, jexp, jsin

bounded = st.floats(-50, 50, allow_nan=False)


@st.composite
def interval_and_point(draw):
    a, b = sorted((draw(bounded), draw(bounded)))
    t = draw(st.floats(0, 1))
    # a + t (b - a) can round just past b, or past a tiny negative b
    return Interval(a, b), min(max(a + t * (b - a), a), b)


def test_construction():
    with pytest.raises(ValueError):
        Interval(1.0, 0.0)
    x = Interval(1.0)
    assert x.lo == x.hi == 1.0


def test_mag_and_mid():
    x = Interval(-3.0, 1.0)
    assert x.mag() == 3.0
    assert x.mid == -1.0


@settings(max_examples=200)
@given(interval_and_point(), interval_and_point())
def test_arithmetic_encloses(p, q):
    (X, x), (Y, y) = p, q
    assert (X + Y).contains(x + y)
    assert (X - Y).contains(x - y)
    assert (X * Y).contains(x * y)
    assert X.sqr().contains(x * x)
    if Y.lo > 0 or Y.hi < 0:
        assert (X / Y).contains(x / y)


@settings(max_examples=200)
@given(interval_and_point())
def test_transcendentals_enclose(p):
    X, x = p
    assert isin(X).contains(math.sin(x))
    assert icos(X).contains(math.cos(x))
    if X.hi < 700:
        assert iexp(X).contains(math.exp(x))


def test_sin_hits_extremes():
    s = isin(Interval(0.0, math.pi))
    assert s.hi == 1.0
    c = icos(Interval(-0.1, 0.1))
    assert c.hi == 1.0 and c.lo <= math.cos(0.1)


def test_degenerate_interval_is_tight():
    s = isin(Interval(0.3))
    assert s.hi - s.lo < 1e-14


def test_jet_derivatives_of_product():
    x = Jet.variable(Interval(2.0), 0, 2)
    y = Jet.variable(Interval(3.0), 1, 2)
    f = x * x * y
    assert f.v.contains(12.0)
    assert f.g[0].contains(12.0) and f.g[1].contains(4.0)
    assert f.H[0, 0].contains(6.0) and f.H[0, 1].contains(4.0) and f.H[1, 1].contains(0.0)


def test_jet_transcendentals_at_point():
    x0 = 0.7
    x = Jet.variable(Interval(x0), 0, 1)
    for jf, f, d2 in ((jsin, math.sin, -math.sin(x0)), (jcos, math.cos, -math.cos(x0)), (jexp, math.exp, math.exp(x0))):
        out = jf(x)
        assert out.v.contains(f(x0))
        assert out.H[0, 0].contains(d2)


@settings(max_examples=100)
@given(interval_and_point())
def test_jet_hessian_encloses_samples(p):
    X, x = p
    X = Interval(X.lo / 10, X.hi / 10)
    x = x / 10
    j = Jet.variable(X, 0, 1)
    out = jexp(j) * jsin(j)
    exact = 2 * math.exp(x) * math.cos(x)
    assert out.H[0, 0].contains(exact)
