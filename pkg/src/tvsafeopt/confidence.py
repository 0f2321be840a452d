"""Confidence intervals and their Lipschitz-propagated intersections.

Intervals live on the extended reals: ``-inf`` and ``+inf`` are ordinary
numpy values and every operation here is total on them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .gp import PosteriorModel, SpatialCache, posterior, posterior_batch

__all__ = [
    "BetaSchedule",
    "ConfidenceTable",
    "Interval",
    "ModelInconsistency",
    "beta",
    "c_update",
    "initial_table",
    "q_interval",
    "update_table",
    "width",
]

logger = logging.getLogger(__name__)

FALLBACK = "fallback"
STRICT = "strict"


class ModelInconsistency(ValueError):
    """The propagated interval and the new GP interval do not overlap."""

    def __init__(self, x: int, i: int, k: int):
        self.x, self.i, self.k = x, i, k
        super().__init__(
            f"empty confidence intersection at decision {x}, output {i}, "
            f"iteration {k}")


@dataclass(frozen=True)
class BetaSchedule:
    """Scaling of the posterior standard deviation in the intervals.

    ``mode="fixed"`` returns ``sqrt_beta`` for every iteration.
    ``mode="theoretical"`` evaluates
    ``B + sigma * sqrt(2 * (capacity(k) + 1 + ln(1/delta)))`` where
    ``capacity`` is a user-supplied, nondecreasing bound standing in for the
    information capacity of ``k * n_outputs`` observations. It may be a
    constant, a sequence indexed by ``k`` (last value repeats), or a
    callable of ``k``.
    """

    mode: str = "fixed"
    sqrt_beta: float = 2.0
    B: float = 1.0
    sigma: float = 0.01
    delta: float = 0.1
    capacity: Union[float, Sequence[float], Callable[[int], float]] = 0.0

    def __post_init__(self):
        if self.mode == "fixed":
            if not self.sqrt_beta > 0:
                raise ValueError("sqrt_beta must be positive")
        elif self.mode == "theoretical":
            if not (self.B > 0 and self.sigma > 0 and 0 < self.delta < 1):
                raise ValueError("need B > 0, sigma > 0, 0 < delta < 1")
            if not callable(self.capacity):
                seq = np.atleast_1d(np.asarray(self.capacity, dtype=float))
                if np.any(seq < 0) or np.any(np.diff(seq) < 0):
                    raise ValueError(
                        "capacity must be nonnegative and nondecreasing")
        else:
            raise ValueError(f"unknown beta mode {self.mode!r}")

    def capacity_at(self, k: int) -> float:
        if callable(self.capacity):
            return float(self.capacity(k))
        seq = np.atleast_1d(np.asarray(self.capacity, dtype=float))
        return float(seq[min(k, seq.size - 1)])


def beta(schedule: BetaSchedule, k: int) -> float:
    """Return the square root of beta at iteration ``k >= 1``."""
    if k < 1:
        raise ValueError("beta is defined for k >= 1")
    if schedule.mode == "fixed":
        return schedule.sqrt_beta
    gamma = schedule.capacity_at(k)
    return schedule.B + schedule.sigma * math.sqrt(
        2.0 * (gamma + 1.0 + math.log(1.0 / schedule.delta)))


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return self.lo > self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def inflate(self, amount: float) -> "Interval":
        return Interval(self.lo - amount, self.hi + amount)

    def intersect(self, other: "Interval") -> "Interval":
        return Interval(max(self.lo, other.lo), min(self.hi, other.hi))


REALS = Interval(-math.inf, math.inf)


def q_interval(model: PosteriorModel, schedule: BetaSchedule, k: int,
               query: Tuple[Sequence[float], float, int]) -> Interval:
    """GP confidence interval ``mean -/+ sqrt(beta_k) * std``."""
    x, t, i = query
    mu, sd = posterior(model, x, t, i)
    b = beta(schedule, k)
    return Interval(mu - b * sd, mu + b * sd)


def c_update(prev: Interval, L_prev: float, q: Interval,
             where: Tuple[int, int, int] = (-1, -1, -1)) -> Interval:
    """Inflate ``prev`` by ``L_prev`` on both sides and intersect with ``q``.

    Raises :class:`ModelInconsistency` carrying ``where = (x, i, k)`` if
    the intersection is empty.
    """
    if L_prev < 0:
        raise ValueError("L_prev must be nonnegative")
    out = prev.inflate(L_prev).intersect(q)
    if out.empty:
        raise ModelInconsistency(*where)
    return out


@dataclass
class ConfidenceTable:
    """Intervals ``[lower, upper]`` for every (decision, output) cell."""

    k: int
    t: int
    lower: np.ndarray
    upper: np.ndarray
    inconsistent: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.inconsistent is None:
            self.inconsistent = np.zeros(self.lower.shape, dtype=bool)

    @property
    def width(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            w = self.upper - self.lower
        w[~np.isfinite(w)] = math.inf
        return w

    def interval(self, x: int, i: int) -> Interval:
        return Interval(float(self.lower[x, i]), float(self.upper[x, i]))


def width(table: ConfidenceTable, x: int, i: int) -> float:
    """``u - l`` at one cell; ``inf`` when either bound is infinite."""
    lo, hi = table.lower[x, i], table.upper[x, i]
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return math.inf
    return float(hi - lo)


def initial_table(n_points: int, n_outputs: int, seeds: np.ndarray,
                  L0: float) -> ConfidenceTable:
    """``[L(0), inf)`` on constraint rows of the seed set, reals elsewhere."""
    lower = np.full((n_points, n_outputs), -math.inf)
    upper = np.full((n_points, n_outputs), math.inf)
    lower[np.asarray(seeds), 1:] = L0
    return ConfidenceTable(0, 0, lower, upper)


def update_table(prev: ConfidenceTable, q_lower: np.ndarray,
                 q_upper: np.ndarray, L_prev: float, k: int, t: int,
                 policy: str = FALLBACK) -> ConfidenceTable:
    """Vectorized interval recursion over the whole grid.

    ``L_prev = inf`` discards the previous table, giving ``C_k = Q_k``.
    Empty cells are replaced by the GP interval under the fallback policy
    and raise :class:`ModelInconsistency` under the strict policy.
    """
    if L_prev < 0:
        raise ValueError("L_prev must be nonnegative")
    if math.isinf(L_prev):
        return ConfidenceTable(k, t, q_lower.copy(), q_upper.copy())
    lower = np.maximum(prev.lower - L_prev, q_lower)
    upper = np.minimum(prev.upper + L_prev, q_upper)
    bad = lower > upper
    if bad.any():
        x, i = (int(v) for v in np.argwhere(bad)[0])
        if policy == STRICT:
            raise ModelInconsistency(x, i, k)
        logger.info("iteration %d: %d empty intersections, falling back",
                    k, int(bad.sum()))
        lower[bad] = q_lower[bad]
        upper[bad] = q_upper[bad]
    return ConfidenceTable(k, t, lower, upper, bad)


def gp_bounds(model: PosteriorModel, schedule: BetaSchedule, k: int,
              X: np.ndarray, t: float,
              cache: Optional[SpatialCache] = None
              ) -> Tuple[np.ndarray, np.ndarray]:
    """Grid-wide GP intervals for every output at iteration ``k``."""
    mu, sd = posterior_batch(model, X, t, cache=cache)
    b = beta(schedule, k)
    return mu - b * sd, mu + b * sd
