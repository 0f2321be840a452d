import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tvsafeopt.confidence import (FALLBACK, REALS, STRICT, BetaSchedule,
                                  Interval, ModelInconsistency, beta,
                                  c_update, initial_table, q_interval,
                                  update_table, width)
from tvsafeopt.gp import ObservationSet, condition
from tvsafeopt.kernel import KernelSpec

INF = math.inf


def test_fixed_beta():
    s = BetaSchedule()
    assert beta(s, 1) == 2.0 and beta(s, 500) == 2.0


def test_theoretical_beta_closed_form():
    s = BetaSchedule("theoretical", B=1.0, sigma=0.1, delta=0.1, capacity=10)
    assert beta(s, 3) == pytest.approx(1.5158, abs=5e-5)
    assert beta(s, 3) == pytest.approx(
        1 + 0.1 * math.sqrt(2 * (11 + math.log(10))), abs=1e-14)


def test_theoretical_beta_monotone_in_capacity():
    s = BetaSchedule("theoretical", capacity=[0, 1, 1, 4, 9])
    vals = [beta(s, k) for k in range(1, 8)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_beta_needs_positive_k():
    with pytest.raises(ValueError):
        beta(BetaSchedule(), 0)


@pytest.mark.parametrize("kw", [
    dict(sqrt_beta=0.0),
    dict(mode="theoretical", delta=1.0),
    dict(mode="theoretical", capacity=[3, 1]),
    dict(mode="other"),
])
def test_invalid_schedules(kw):
    with pytest.raises(ValueError):
        BetaSchedule(**kw)


def test_q_interval_prior():
    m = condition(ObservationSet.empty(1, 1), KernelSpec())
    assert q_interval(m, BetaSchedule(), 1, ([0.0], 0.0, 0)) == \
        Interval(-2.0, 2.0)


def test_q_interval_arithmetic(monkeypatch):
    import tvsafeopt.confidence as conf
    monkeypatch.setattr(conf, "posterior", lambda *a: (0.5, 0.1))
    q = q_interval(None, BetaSchedule(), 1, ([0.0], 0.0, 0))
    assert q.lo == pytest.approx(0.3) and q.hi == pytest.approx(0.7)


def test_q_interval_degenerate(monkeypatch):
    import tvsafeopt.confidence as conf
    monkeypatch.setattr(conf, "posterior", lambda *a: (0.25, 0.0))
    assert q_interval(None, BetaSchedule(), 1, ([0.0], 0.0, 0)) == \
        Interval(0.25, 0.25)


def test_c_update_examples():
    q = Interval(-0.3, 4.0)
    assert c_update(REALS, 0.7, q) == q
    out = c_update(Interval(0.0, 1.0), 0.5, Interval(0.2, 2.0))
    assert (out.lo, out.hi) == pytest.approx((0.2, 1.5))
    out = c_update(Interval(0.1, INF), 0.1, Interval(0.5, 0.9))
    assert (out.lo, out.hi) == (0.5, 0.9)


def test_c_update_empty_raises():
    with pytest.raises(ModelInconsistency) as info:
        c_update(Interval(0.0, 0.1), 0.1, Interval(1.0, 2.0), (4, 1, 9))
    assert (info.value.x, info.value.i, info.value.k) == (4, 1, 9)


def test_width():
    t = initial_table(3, 2, np.array([0]), 0.1)
    t.lower[1, 0], t.upper[1, 0] = 0.2, 1.5
    t.lower[2, 0] = t.upper[2, 0] = 0.4
    assert width(t, 1, 0) == pytest.approx(1.3)
    assert width(t, 2, 0) == 0.0
    assert width(t, 0, 1) == INF
    assert t.width[0, 1] == INF


def test_initial_table_layout():
    t = initial_table(4, 3, np.array([1, 2]), 0.05)
    assert np.all(t.lower[[1, 2], 1:] == 0.05)
    assert np.all(np.isneginf(t.lower[[1, 2], 0]))
    assert np.all(np.isneginf(t.lower[[0, 3]]))
    assert np.all(np.isposinf(t.upper))


def test_update_table_inf_takes_q():
    prev = initial_table(2, 1, np.array([0]), 0.0)
    lo, hi = np.array([[0.1], [0.2]]), np.array([[0.3], [0.4]])
    t = update_table(prev, lo, hi, INF, 1, 1)
    np.testing.assert_array_equal(t.lower, lo)
    np.testing.assert_array_equal(t.upper, hi)


def test_update_table_policies():
    prev = initial_table(2, 1, np.array([0]), 0.0)
    prev.lower[:], prev.upper[:] = 0.0, 0.1
    lo, hi = np.array([[1.0], [0.0]]), np.array([[2.0], [0.05]])
    t = update_table(prev, lo, hi, 0.1, 1, 1, FALLBACK)
    assert t.inconsistent[0, 0] and not t.inconsistent[1, 0]
    assert (t.lower[0, 0], t.upper[0, 0]) == (1.0, 2.0)
    with pytest.raises(ModelInconsistency):
        update_table(prev, lo, hi, 0.1, 1, 1, STRICT)


bounds = st.floats(-50, 50, allow_nan=False)


@st.composite
def interval_steps(draw):
    """A consistent previous interval, inflation and overlapping GP band."""
    lo = draw(bounds)
    hi = lo + draw(st.floats(0, 20))
    L = draw(st.floats(0, 5))
    a = draw(st.floats(lo - L, hi + L))
    qlo = a - draw(st.floats(0, 20))
    qhi = a + draw(st.floats(0, 20))
    return Interval(lo, hi), L, Interval(qlo, qhi)


@settings(max_examples=1000, deadline=None)
@given(interval_steps())
def test_recursion_containment_and_lower_bound(case):
    prev, L, q = case
    out = c_update(prev, L, q)
    grown = prev.inflate(L)
    assert grown.lo <= out.lo <= out.hi <= grown.hi
    assert q.lo <= out.lo and out.hi <= q.hi
    assert out.lo >= prev.lo - L
    if L == 0:
        assert out.lo >= prev.lo and out.hi <= prev.hi


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(0, 2)),
                min_size=1, max_size=12),
       st.floats(0, 0.5))
def test_table_lower_bound_recursion(bands, L):
    prev = initial_table(1, 1, np.array([0]), 0.0)
    for k, (mid, half) in enumerate(bands, start=1):
        lo, hi = np.array([[mid - half]]), np.array([[mid + half]])
        t = update_table(prev, lo, hi, L, k, k, FALLBACK)
        if not t.inconsistent.any():
            assert t.lower[0, 0] >= prev.lower[0, 0] - L
            assert t.upper[0, 0] <= prev.upper[0, 0] + L
        assert t.lower[0, 0] <= t.upper[0, 0]
        prev = t
