import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tvsafeopt.grid import DecisionGrid
from tvsafeopt.metrics import (ground_truth_safe_region, optimal_reward,
                               reach_closure, reach_step, regret_update,
                               safety_metrics)
from tvsafeopt.problems import synthetic_problem


def mask(n, idx):
    m = np.zeros(n, dtype=bool)
    m[list(idx)] = True
    return m


def test_safety_metrics_arithmetic():
    safe = mask(30, range(10))
    truth = mask(30, list(range(3, 10)) + list(range(10, 23)))
    assert truth.sum() == 20
    unsafe, ratio, coverage = safety_metrics(safe, truth)
    assert (unsafe, ratio) == (3, 0.3)
    assert coverage == pytest.approx(7 / 20)


def test_safety_metrics_trivial_cases():
    truth = mask(5, [1, 2, 3])
    assert safety_metrics(mask(5, [2]), truth)[1] == 0.0
    assert safety_metrics(truth, truth) == (0, 0.0, 1.0)
    assert safety_metrics(mask(5, []), mask(5, [])) == (0, 0.0, 0.0)


def test_ground_truth_region():
    p = synthetic_problem(horizon=5, n=30)
    pts = p.grid.points
    disk = (pts[:, 0] + 0.5) ** 2 + (pts[:, 1] - 0.3) ** 2 <= 1.0
    np.testing.assert_array_equal(ground_truth_safe_region(p, 0), disk)


def test_regret_examples():
    truth = mask(3, [0, 1])
    reward = np.array([1.0, 3.0, 10.0])
    best = optimal_reward(reward, truth)
    assert best == 3.0
    assert regret_update(0.0, best, 1.0) == (2.0, 2.0)
    assert regret_update(5.0, best, 3.0) == (0.0, 5.0)
    # an infeasible pick above the feasible optimum is clamped
    assert regret_update(5.0, best, 10.0) == (0.0, 5.0)
    assert math.isnan(optimal_reward(reward, mask(3, [])))
    assert regret_update(1.0, math.nan, 2.0) == (0.0, 1.0)


LINE5 = DecisionGrid.from_points([0.0, 1.0, 2.0, 3.0, 4.0])


def chain_closure(c, grid, L_x, S, a):
    """Grow ``S`` one certified point at a time until nothing changes."""
    pts = grid.points
    cur = set(np.flatnonzero(S).tolist())
    changed = True
    while changed:
        changed = False
        for j in range(len(grid)):
            if j in cur:
                continue
            ok = all(any(c[s, i] - L_x * np.linalg.norm(pts[s] - pts[j]) - a
                         >= 0 for s in cur) for i in range(c.shape[1]))
            if ok:
                cur.add(j)
                changed = True
    return mask(len(grid), cur)


def test_reach_examples():
    c = np.array([[0.5], [2.0], [1.0], [0.2], [5.0]])
    full = mask(5, range(5))
    np.testing.assert_array_equal(reach_step(c, LINE5, 1.0, full, 0.1), full)
    S = mask(5, [1])
    np.testing.assert_array_equal(reach_step(c, LINE5, 1.0, S, 100.0), S)
    np.testing.assert_array_equal(reach_closure(c, LINE5, 1.0, S, 0.0),
                                  mask(5, [0, 1, 2, 3]))


def test_reach_chain_oracle_exhaustive():
    rng = np.random.default_rng(0)
    for _ in range(40):
        c = rng.uniform(-1, 3, (5, 2))
        for seeds in itertools.chain.from_iterable(
                itertools.combinations(range(5), r) for r in (1, 2)):
            S = mask(5, seeds)
            for a in (0.0, 0.3):
                np.testing.assert_array_equal(
                    reach_closure(c, LINE5, 1.0, S, a),
                    chain_closure(c, LINE5, 1.0, S, a))


@st.composite
def reach_cases(draw):
    n = draw(st.integers(2, 9))
    grid = DecisionGrid.from_points(np.sort(np.unique(np.round(draw(
        st.lists(st.floats(-4, 4), min_size=n, max_size=n)), 2))))
    n = len(grid)
    m = draw(st.integers(1, 2))
    c = np.array(draw(st.lists(st.lists(st.floats(-2, 3), min_size=m,
                                        max_size=m), min_size=n,
                               max_size=n)))
    S = np.array(draw(st.lists(st.booleans(), min_size=n, max_size=n)))
    L_x = draw(st.sampled_from([0.0, 0.5, 1.0, 2.0]))
    return c, grid, L_x, S


@settings(max_examples=300, deadline=None)
@given(reach_cases(), st.floats(0, 1), st.floats(0, 1))
def test_reach_closure_properties(case, eps, Lbar):
    c, grid, L_x, S = case
    R = reach_closure(c, grid, L_x, S, Lbar)
    np.testing.assert_array_equal(reach_closure(c, grid, L_x, R, Lbar), R)
    inner = reach_closure(c, grid, L_x, S, eps + Lbar)
    outer = reach_closure(c, grid, L_x, S, 0.0)
    assert not (inner & ~R).any() and not (R & ~outer).any()
    assert not (S & ~R).any()
