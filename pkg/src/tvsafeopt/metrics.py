"""Per-iteration safety and regret metrics, and reachability operators.

The reachability operators work on frozen constraint values and serve as
an independent check of how far a safe set can grow.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import List, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .grid import DecisionGrid

__all__ = [
    "IterationRecord",
    "ground_truth_safe_region",
    "optimal_reward",
    "reach_closure",
    "reach_step",
    "regret_update",
    "safety_metrics",
]


@dataclass
class IterationRecord:
    k: int
    t: int
    variant: str
    seed: int
    safe_set_size: int
    unsafe_count: int
    unsafe_ratio: float
    coverage_ratio: float
    x_k: str
    x_hat_k: str
    found_reward: float
    evaluated_reward: float
    optimal_reward: float
    instant_regret: float
    cumulative_regret: float
    terminated: bool

    @classmethod
    def columns(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


def ground_truth_safe_region(problem, t: int) -> np.ndarray:
    """Grid points satisfying every constraint at ``t``."""
    return problem.feasible(t)


def safety_metrics(safe: np.ndarray, truth: np.ndarray
                   ) -> Tuple[int, float, float]:
    """Unsafe count, unsafe ratio and coverage ratio of a safe set.

    Ratios are zero when their denominator is empty.
    """
    safe = np.asarray(safe, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    n_safe = int(safe.sum())
    n_truth = int(truth.sum())
    unsafe = int((safe & ~truth).sum())
    ratio = unsafe / n_safe if n_safe else 0.0
    coverage = int((safe & truth).sum()) / n_truth if n_truth else 0.0
    return unsafe, ratio, coverage


def optimal_reward(reward: np.ndarray, truth: np.ndarray) -> float:
    """Best reward over the ground-truth safe region (nan if empty)."""
    if not truth.any():
        return math.nan
    return float(np.max(reward[truth]))


def regret_update(cumulative: float, optimal: float,
                  found: float) -> Tuple[float, float]:
    """Return ``(instant, cumulative)`` regret after one more iteration.

    A decision outside the true safe region can beat the feasible optimum;
    the gap is clamped at zero so cumulative regret never decreases.
    """
    if not (math.isfinite(optimal) and math.isfinite(found)):
        return 0.0, cumulative
    instant = max(0.0, optimal - found)
    return instant, cumulative + instant


def reach_step(constraints: np.ndarray, grid: DecisionGrid, L_x: float,
               S: np.ndarray, a: float) -> np.ndarray:
    """One expansion of ``S`` under measurement margin ``a``.

    ``constraints`` holds frozen constraint values, shape (N, m). A point
    joins when every constraint is certified by some member of ``S``.
    """
    S = np.asarray(S, dtype=bool)
    constraints = np.asarray(constraints, dtype=float)
    if constraints.ndim == 1:
        constraints = constraints[:, None]
    pts = grid.points
    members = np.flatnonzero(S)
    joined = np.ones(len(grid), dtype=bool)
    tree = None
    for i in range(constraints.shape[1]):
        slack = constraints[members, i] - a
        src = members[slack >= 0]
        hit = np.zeros(len(grid), dtype=bool)
        if src.size and L_x == 0:
            hit[:] = True
        elif src.size:
            if tree is None:
                tree = cKDTree(pts)
            radii = (constraints[src, i] - a) / L_x
            near = tree.query_ball_point(pts[src], radii * (1 + 1e-9) + 1e-12)
            for s, cand in zip(src, near):
                cand = np.asarray(cand, dtype=int)
                cand = cand[~hit[cand]]
                if cand.size == 0:
                    continue
                d = np.sqrt(((pts[cand] - pts[s]) ** 2).sum(axis=1))
                hit[cand[constraints[s, i] - L_x * d - a >= 0]] = True
        joined &= hit
    return S | joined


def reach_closure(constraints: np.ndarray, grid: DecisionGrid, L_x: float,
                  S: np.ndarray, a: float) -> np.ndarray:
    """Fixed point of :func:`reach_step` (at most ``len(grid)`` rounds)."""
    cur = np.asarray(S, dtype=bool).copy()
    for _ in range(len(grid) + 1):
        nxt = reach_step(constraints, grid, L_x, cur, a)
        if np.array_equal(nxt, cur):
            return cur
        cur = nxt
    return cur
