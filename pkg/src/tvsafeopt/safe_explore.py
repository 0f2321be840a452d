"""Safe-set recursion, maximizers, expanders and the main loop.

Three variants share this code:

``tvsafeopt``
    Spatio-temporal kernels, intervals inflated by the temporal Lipschitz
    bound between steps, Lipschitz safe-set and expander rules.
``tvsafeopt-lf``
    Lipschitz-free: the safe set is every point whose constraint lower
    bounds are nonnegative, and expanders are found by conditioning an
    auxiliary GP on an optimistic hypothetical observation.
``safeopt``
    Stationary baseline: spatial-only kernels, no interval inflation and
    no temporal margin.

Sets are boolean masks over the flattened grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .confidence import (FALLBACK, BetaSchedule, ConfidenceTable, beta,
                         gp_bounds, initial_table, update_table)
from .gp import (ObservationSet, PosteriorModel, SpatialCache, condition,
                 posterior_batch, posterior_cross_cov)
from .grid import DecisionGrid
from .kernel import SPATIAL, KernelSpec

__all__ = [
    "TVSAFEOPT", "TVSAFEOPT_LF", "SAFEOPT", "VARIANTS",
    "AlgorithmSettings",
    "ExplorationState",
    "LipschitzSchedule",
    "Terminated",
    "best_estimate",
    "cone_cover",
    "expander_count",
    "expander_counts_lf",
    "expanders",
    "expanders_lf",
    "initialize",
    "maximizers",
    "run",
    "select_decision",
    "step",
    "update_safe_set",
    "update_safe_set_lf",
]

TVSAFEOPT = "tvsafeopt"
TVSAFEOPT_LF = "tvsafeopt-lf"
SAFEOPT = "safeopt"
VARIANTS = (TVSAFEOPT, TVSAFEOPT_LF, SAFEOPT)

_BUDGET = 1 << 21   # floats per broadcast block in the axis transform


class Terminated(Exception):
    """The safe set became empty."""

    def __init__(self, k: int, t: int):
        self.k, self.t = k, t
        super().__init__(f"empty safe set at iteration {k} (t={t})")


@dataclass(frozen=True)
class LipschitzSchedule:
    """Spatial constant, per-step temporal bounds and their total.

    ``temporal[t]`` bounds ``|h(x, t+1, i) - h(x, t, i)|``. Lookups past
    the end of the sequence reuse its last entry.
    """

    spatial: float
    temporal: Tuple[float, ...] = (0.0,)
    total: Optional[float] = None

    def __post_init__(self):
        temporal = tuple(float(v) for v in np.atleast_1d(self.temporal))
        if not temporal:
            raise ValueError("temporal bounds must not be empty")
        object.__setattr__(self, "temporal", temporal)
        if self.spatial < 0 or any(v < 0 for v in temporal):
            raise ValueError("Lipschitz constants must be nonnegative")
        if self.total is None:
            object.__setattr__(self, "total", float(sum(temporal)))
        elif self.total < sum(temporal) - 1e-12 * max(1.0, self.total):
            raise ValueError("total must bound the sum of temporal bounds")

    @classmethod
    def constant(cls, spatial: float, temporal: float,
                 horizon: int) -> "LipschitzSchedule":
        return cls(spatial, (temporal,) * max(horizon, 1))

    def at(self, t: int) -> float:
        if t < 0:
            raise ValueError("t must be nonnegative")
        return self.temporal[min(t, len(self.temporal) - 1)]

    def zero_temporal(self) -> "LipschitzSchedule":
        return LipschitzSchedule(self.spatial, (0.0,), 0.0)


@dataclass(frozen=True)
class AlgorithmSettings:
    """Everything the loop needs besides the problem itself."""

    variant: str
    kernels: Tuple[KernelSpec, ...]
    beta: BetaSchedule
    lipschitz: LipschitzSchedule
    policy: str = FALLBACK

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        object.__setattr__(self, "kernels", tuple(self.kernels))
        if self.variant == SAFEOPT and any(k.mode != SPATIAL
                                           for k in self.kernels):
            raise ValueError("safeopt uses spatial-only kernels")

    @classmethod
    def for_variant(cls, variant: str, kernels: Sequence[KernelSpec],
                    beta: BetaSchedule, lipschitz: LipschitzSchedule,
                    policy: str = FALLBACK) -> "AlgorithmSettings":
        """Build settings, dropping the temporal parts for ``safeopt``."""
        kernels = tuple(kernels)
        if variant == SAFEOPT:
            kernels = tuple(KernelSpec.spatial(k.spatial_lengthscale)
                            for k in kernels)
            lipschitz = lipschitz.zero_temporal()
        return cls(variant, kernels, beta, lipschitz, policy)

    def inflation(self, t: int) -> float:
        """Amount added on both sides of the previous interval."""
        if self.variant == TVSAFEOPT_LF:
            return math.inf
        if self.variant == SAFEOPT:
            return 0.0
        return self.lipschitz.at(t)

    def margin(self, t: int) -> float:
        return 0.0 if self.variant == SAFEOPT else self.lipschitz.at(t)


# ---------------------------------------------------------------------------
# set operations


def _axis_min_plus(phi: np.ndarray, coords: np.ndarray, axis: int
                   ) -> np.ndarray:
    """min over q of phi[..., q, ...] + (coords[p] - coords[q])**2."""
    n = coords.size
    if n == 1:
        return phi
    d2 = (coords[:, None] - coords[None, :]) ** 2
    moved = np.moveaxis(phi, axis, -1)
    flat = moved.reshape(-1, n)
    out = np.empty_like(flat)
    rows = max(1, _BUDGET // (n * n))
    for lo in range(0, flat.shape[0], rows):
        block = flat[lo:lo + rows]
        out[lo:lo + rows] = (block[:, None, :] + d2[None, :, :]).min(axis=2)
    return np.moveaxis(out.reshape(moved.shape), -1, axis)


def cone_cover(grid: DecisionGrid, sources: np.ndarray, values: np.ndarray,
               L_x: float, margin: float) -> np.ndarray:
    """Points ``x'`` with ``values[x] - L_x d(x, x') - margin >= 0`` for
    some source ``x``.

    On the product grid the test ``d <= r`` with ``r = (values - margin)
    / L_x`` becomes ``min_x d^2 - r^2 <= 0``, which separates over axes.
    Points whose transformed score is within rounding distance of zero
    are rechecked with the direct predicate.
    """
    sources = np.asarray(sources, dtype=bool)
    slack = np.where(sources, values - margin, -math.inf)
    active = slack >= 0
    if not active.any():
        return np.zeros(len(grid), dtype=bool)
    if L_x == 0:
        return np.ones(len(grid), dtype=bool)
    r = slack[active] / L_x
    if np.isinf(r).any():
        return np.ones(len(grid), dtype=bool)
    phi = np.full(len(grid), math.inf)
    phi[active] = -(r * r)
    phi = phi.reshape(grid.shape)
    for axis, coords in enumerate(grid.axes):
        phi = _axis_min_plus(phi, coords, axis)
    phi = phi.reshape(-1)
    covered = phi <= 0
    tol = 1e-9 * (1.0 + float(np.max(r * r)))
    unsure = np.flatnonzero(np.abs(phi) <= tol)
    if unsure.size:
        src = np.flatnonzero(active)
        pts = grid.points
        for j in unsure:
            d = np.sqrt(((pts[src] - pts[j]) ** 2).sum(axis=1))
            covered[j] = bool(np.any(values[src] - L_x * d - margin >= 0))
    return covered


def update_safe_set(prev_safe: np.ndarray, lower: np.ndarray,
                    grid: DecisionGrid, L_x: float, L_t: float
                    ) -> np.ndarray:
    """Lipschitz safe-set recursion.

    A point is safe when, for every constraint column of ``lower``
    (columns 1..m), some previously safe point certifies it with margin
    ``L_t``. The result may be smaller than ``prev_safe`` or empty.
    """
    safe = np.ones(len(grid), dtype=bool)
    for i in range(1, lower.shape[1]):
        safe &= cone_cover(grid, prev_safe, lower[:, i], L_x, L_t)
        if not safe.any():
            break
    return safe


def update_safe_set_lf(lower: np.ndarray) -> np.ndarray:
    """Points whose constraint lower bounds are all nonnegative."""
    return np.all(lower[:, 1:] >= 0, axis=1)


def maximizers(safe: np.ndarray, lower: np.ndarray,
               upper: np.ndarray) -> np.ndarray:
    """Safe points whose reward upper bound reaches the best lower bound."""
    out = np.zeros_like(safe)
    if not safe.any():
        return out
    best = np.max(lower[safe, 0])
    out[safe] = upper[safe, 0] >= best
    return out


def _nearest_outside(grid: DecisionGrid, safe: np.ndarray,
                     idx: np.ndarray) -> np.ndarray:
    outside = np.flatnonzero(~safe)
    pts = grid.points
    _, nn = cKDTree(pts[outside]).query(pts[idx])
    diff = pts[outside[nn]] - pts[idx]
    return np.sqrt((diff * diff).sum(axis=1))


def expanders(safe: np.ndarray, upper: np.ndarray, grid: DecisionGrid,
              L_x: float, L_t: float) -> np.ndarray:
    """Safe points that could certify at least one unsafe point.

    Only the nearest unsafe point matters for membership, so this needs a
    nearest-neighbour query per safe point rather than a full count.
    """
    out = np.zeros_like(safe)
    if safe.all() or not safe.any():
        return out
    idx = np.flatnonzero(safe)
    d = _nearest_outside(grid, safe, idx)
    u = upper[idx, 1:]
    ok = np.any(u - L_x * d[:, None] - L_t >= 0, axis=1)
    out[idx[ok]] = True
    return out


def expander_count(x: int, safe: np.ndarray, upper: np.ndarray,
                   grid: DecisionGrid, L_x: float, L_t: float) -> int:
    """Number of unsafe points that ``x`` could certify."""
    outside = np.flatnonzero(~safe)
    if outside.size == 0:
        return 0
    pts = grid.points
    d = np.sqrt(((pts[outside] - pts[x]) ** 2).sum(axis=1))
    hit = np.any(upper[x, 1:][None, :] - L_x * d[:, None] - L_t >= 0, axis=1)
    return int(hit.sum())


def expander_counts_lf(model: PosteriorModel, schedule: BetaSchedule,
                       safe: np.ndarray, upper: np.ndarray,
                       grid: DecisionGrid, k: int,
                       candidates: Optional[np.ndarray] = None,
                       chunk: int = 256) -> np.ndarray:
    """Lipschitz-free expander counts.

    For each candidate ``x`` and constraint ``i``, the GP of output ``i`` is
    conditioned on a hypothetical observation ``upper[x, i]`` at ``(x, k)``
    via a rank-one update, and unsafe points whose lower bound at time
    ``k + 1`` becomes nonnegative are counted (once per point, over all
    constraints).
    """
    if candidates is None:
        candidates = np.flatnonzero(safe)
    candidates = np.asarray(candidates, dtype=int)
    counts = np.zeros(candidates.size, dtype=int)
    outside = np.flatnonzero(~safe)
    if outside.size == 0 or candidates.size == 0:
        return counts
    pts = grid.points
    noise2 = model.observations.noise_std ** 2
    b = beta(schedule, k + 1)
    n_out = upper.shape[1]
    mu_q, sd_q = posterior_batch(model, pts[outside], k + 1)
    for lo in range(0, candidates.size, chunk):
        cand = candidates[lo:lo + chunk]
        mu_z, sd_z = posterior_batch(model, pts[cand], k)
        hit = np.zeros((outside.size, cand.size), dtype=bool)
        for i in range(1, n_out):
            cov = posterior_cross_cov(model, i, pts[outside], k + 1,
                                      pts[cand], k)
            denom = sd_z[:, i] ** 2 + noise2
            gain = cov / denom[None, :]
            mean = mu_q[:, i:i + 1] + gain * (upper[cand, i] - mu_z[:, i])
            var = sd_q[:, i:i + 1] ** 2 - cov * gain
            var[var < 0] = 0.0
            hit |= mean - b * np.sqrt(var) >= 0
        counts[lo:lo + chunk] = hit.sum(axis=0)
    return counts


def expanders_lf(model: PosteriorModel, schedule: BetaSchedule,
                 safe: np.ndarray, upper: np.ndarray, grid: DecisionGrid,
                 k: int) -> np.ndarray:
    out = np.zeros_like(safe)
    if safe.all() or not safe.any():
        return out
    idx = np.flatnonzero(safe)
    out[idx] = expander_counts_lf(model, schedule, safe, upper, grid, k,
                                  idx) > 0
    return out


def select_decision(safe: np.ndarray, maxi: np.ndarray, expa: np.ndarray,
                    widths: np.ndarray) -> int:
    """Most uncertain point of ``maxi | expa``.

    Ties go to the lowest grid index. If both sets are empty the whole
    safe set is searched instead.
    """
    pool = np.flatnonzero(maxi | expa)
    if pool.size == 0:
        pool = np.flatnonzero(safe)
    if pool.size == 0:
        raise ValueError("cannot select from an empty safe set")
    score = widths[pool].max(axis=1)
    return int(pool[np.argmax(score)])


def best_estimate(safe: np.ndarray, lower: np.ndarray) -> int:
    """Safe point with the largest reward lower bound (lowest index on ties)."""
    idx = np.flatnonzero(safe)
    if idx.size == 0:
        raise ValueError("cannot select from an empty safe set")
    return int(idx[np.argmax(lower[idx, 0])])


# ---------------------------------------------------------------------------
# the loop


@dataclass
class ExplorationState:
    """Snapshot after iteration ``k`` (which ran at time ``t == k``)."""

    settings: AlgorithmSettings
    k: int
    t: int
    safe: np.ndarray
    maxi: np.ndarray
    expa: np.ndarray
    table: ConfidenceTable
    model: PosteriorModel
    x_k: Optional[int]
    x_hat: Optional[int]
    terminated: bool = False
    inconsistent_cells: int = 0
    y_k: Optional[np.ndarray] = field(default=None, repr=False)
    cache: Optional[SpatialCache] = field(default=None, repr=False)

    @property
    def variant(self) -> str:
        return self.settings.variant

    @property
    def observations(self) -> ObservationSet:
        return self.model.observations


def initialize(problem, settings: AlgorithmSettings,
               rng: np.random.Generator) -> ExplorationState:
    """Iteration zero: seed intervals and one evaluation inside the seed set."""
    grid = problem.grid
    seeds = np.asarray(problem.safe_seed, dtype=int)
    n_outputs = problem.n_outputs
    if len(settings.kernels) != n_outputs:
        raise ValueError(f"problem has {n_outputs} outputs but "
                         f"{len(settings.kernels)} kernels were given")
    safe = np.zeros(len(grid), dtype=bool)
    safe[seeds] = True
    L0 = 0.0 if settings.variant == SAFEOPT else settings.lipschitz.at(0)
    table = initial_table(len(grid), n_outputs, seeds, L0)
    x0 = int(seeds.min())
    y0 = problem.evaluate_noisy(x0, 0, rng)
    obs = ObservationSet.empty(grid.dim, n_outputs, problem.noise_std)
    model = condition(obs.append(grid.points[x0], 0, y0), settings.kernels)
    empty = np.zeros_like(safe)
    return ExplorationState(settings, 0, 0, safe, empty, empty.copy(),
                            table, model, x0, x0, y_k=y0)


def step(state: ExplorationState, problem,
         rng: np.random.Generator) -> ExplorationState:
    """Run one iteration at ``t = state.t + 1``.

    Returns a terminated state (with ``x_k`` unset) if the safe set
    becomes empty; the caller decides whether to stop.
    """
    if state.terminated:
        raise Terminated(state.k, state.t)
    s = state.settings
    grid = problem.grid
    k = state.k + 1
    t = k
    cache = state.cache if state.cache is not None else SpatialCache(
        grid.points)
    q_lo, q_hi = gp_bounds(state.model, s.beta, k, grid.points, t, cache)
    table = update_table(state.table, q_lo, q_hi, s.inflation(t - 1), k, t,
                         s.policy)
    n_bad = int(table.inconsistent.sum())

    if s.variant == TVSAFEOPT_LF:
        safe = update_safe_set_lf(table.lower)
    else:
        safe = update_safe_set(state.safe, table.lower, grid,
                               s.lipschitz.spatial, s.margin(t))
    if not safe.any():
        empty = np.zeros_like(safe)
        return ExplorationState(s, k, t, safe, empty, empty.copy(), table,
                                state.model, None, None, True,
                                state.inconsistent_cells + n_bad,
                                cache=cache)

    maxi = maximizers(safe, table.lower, table.upper)
    if s.variant == TVSAFEOPT_LF:
        expa = expanders_lf(state.model, s.beta, safe, table.upper, grid, k)
    else:
        expa = expanders(safe, table.upper, grid, s.lipschitz.spatial,
                         s.margin(t))
    x_k = select_decision(safe, maxi, expa, table.width)
    x_hat = best_estimate(safe, table.lower)

    y = problem.evaluate_noisy(x_k, t, rng)
    model = state.model.extend(grid.points[x_k], t, y)
    return ExplorationState(s, k, t, safe, maxi, expa, table, model, x_k,
                            x_hat, False, state.inconsistent_cells + n_bad,
                            y, cache)


def run(problem, settings: AlgorithmSettings, rng: np.random.Generator,
        horizon: Optional[int] = None) -> Iterator[ExplorationState]:
    """Yield the state after every iteration ``k = 0..horizon``.

    Stops after yielding a terminated state.
    """
    horizon = problem.horizon if horizon is None else horizon
    state = initialize(problem, settings, rng)
    yield state
    for _ in range(horizon):
        state = step(state, problem, rng)
        yield state
        if state.terminated:
            return
