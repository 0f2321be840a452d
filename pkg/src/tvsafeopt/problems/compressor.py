"""Three parallel gas compressors with head-dependent operating envelopes.

Decisions are the per-compressor mass flows divided by ``K``. The reward is
the negated (scaled) station power under degradation; the constraints keep
every flow between the surge/minimum-speed and choke/maximum-speed curves
and the total flow above a fraction of the demand.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..grid import DecisionGrid
from ..kernel import KernelSpec
from .base import ProblemInstance
from .timeseries import CompressorTimeSeries

__all__ = [
    "K",
    "NoFeasiblePoint",
    "approx_optimization_baseline",
    "compressor_problem",
    "envelope",
    "flow_bounds",
    "linear_envelope",
    "power_terms",
]

K = 200.0
DEMAND_FRACTION = 0.67
FLOW_BOUNDS = (50.0, 250.0)

# power fit in normalized flow and head
M_CENTER, M_SCALE = 157.4, 34.37
H_CENTER, H_SCALE = 1.016e5, 3.210e4
ALPHA = (1.979e7, 5.274e6, 5.375e6, 6.055e5, 5.718e5, 3.319e5)
POWER_SCALE = 1e7

SURGE = ((1.235e5, 3.764e4), (-1.953, 16.86, 118.1))
MIN_SPEED = ((6.152e4, 7002.0), (-1.516, -11.12, 116.9))
CHOKE = ((8.706e4, 5.289e4), (73.21, 183.7))
MAX_SPEED = ((1.572e5, 2.044e4), (-7.260, -29.65, 204.4))

SURGE_LIN = (4.481e-4, 59.76)
MIN_SPEED_LIN = (-1.333e-3, 193.3)
CHOKE_LIN = (1.611e-3, 46.77)
MAX_SPEED_LIN = (-1.667e-3, 461.7)


class NoFeasiblePoint(Exception):
    """The linearized envelope contains no grid point."""


def _quadratic(H, curve):
    (center, scale), (a, b, c) = curve
    z = (H - center) / scale
    return a * z * z + b * z + c


def envelope(H):
    """Surge, minimum-speed, choke and maximum-speed flows (kg/s) at ``H``."""
    (center, scale), (a, b) = CHOKE
    choke = a * (H - center) / scale + b
    return (_quadratic(H, SURGE), _quadratic(H, MIN_SPEED), choke,
            _quadratic(H, MAX_SPEED))


def linear_envelope(H):
    """Linear approximations of the same four curves."""
    return tuple(a * H + b for a, b in
                 (SURGE_LIN, MIN_SPEED_LIN, CHOKE_LIN, MAX_SPEED_LIN))


def flow_bounds(H, linear: bool = False):
    """Scaled lower and upper per-compressor bounds."""
    surge, min_speed, choke, max_speed = (linear_envelope(H) if linear
                                          else envelope(H))
    return max(surge, min_speed) / K, min(choke, max_speed) / K


def power_terms(m, H, d):
    """Per-compressor scaled power ``(alpha . features) / ((1 - d) 1e7)``."""
    a1, a2, a3, a4, a5, a6 = ALPHA
    mt = (np.asarray(m, dtype=float) - M_CENTER) / M_SCALE
    ht = (H - H_CENTER) / H_SCALE
    p = a1 + a2 * mt + a3 * ht + a4 * mt * mt + a5 * mt * ht + a6 * ht * ht
    return p / ((1.0 - np.asarray(d, dtype=float)) * POWER_SCALE)


def _make_h(series: CompressorTimeSeries):
    bounds = [flow_bounds(H) for H in series.H]

    def h(X: np.ndarray, t: int) -> np.ndarray:
        t = int(t)
        lo, hi = bounds[t]
        m = X * K
        f = -power_terms(m, series.H[t], series.d[t][None, :]).sum(axis=1)
        cols = [f]
        for j in range(3):
            cols += [X[:, j] - lo, hi - X[:, j]]
        cols.append(X.sum(axis=1) - DEMAND_FRACTION * series.M[t] / K)
        return np.stack(cols, axis=1)

    return h


def compressor_problem(series: CompressorTimeSeries,
                       horizon: Optional[int] = None, n: int = 60,
                       noise_std: float = 0.01) -> ProblemInstance:
    """Station problem on ``[50/K, 250/K]^3`` with ``n`` points per axis.

    ``series`` must cover ``t = 0..horizon``.
    """
    if horizon is None:
        horizon = len(series) - 1
    if len(series) < horizon + 1:
        raise ValueError(f"series has {len(series)} steps, horizon {horizon} "
                         f"needs {horizon + 1}")
    lo, hi = (v / K for v in FLOW_BOUNDS)
    grid = DecisionGrid.uniform([(lo, hi)] * 3, [n] * 3, scale=K)
    seed = grid.nearest([series.M[0] / (3 * K)] * 3)
    kernels = ((KernelSpec.spatio_temporal(1.0, 80.0),) * 7
               + (KernelSpec.spatio_temporal(1.0, 70.0),))
    return ProblemInstance("compressor", grid, horizon, _make_h(series), 7,
                           np.array([seed]), noise_std, kernels,
                           meta={"series": series})


def approx_optimization_baseline(problem: ProblemInstance, t: int,
                                 series: Optional[CompressorTimeSeries] = None
                                 ) -> int:
    """Best grid point under the linearized envelope and the demand bound.

    Returns the grid index maximizing the true reward; raises
    :class:`NoFeasiblePoint` when the linearized set is empty.
    """
    mask = linearized_feasible(problem, t, series)
    if not mask.any():
        raise NoFeasiblePoint(f"no feasible grid point at t={t}")
    idx = np.flatnonzero(mask)
    f = problem.reward_at(t)[idx]
    return int(idx[np.argmax(f)])


def linearized_feasible(problem: ProblemInstance, t: int,
                        series: Optional[CompressorTimeSeries] = None
                        ) -> np.ndarray:
    """Grid mask of the linearized constraint set at time ``t``."""
    if series is None:
        series = problem.meta.get("series")
    if problem.name.split("@")[0] != "compressor" or series is None:
        raise ValueError("the approximate baseline needs the compressor "
                         "problem and its time series")
    lo, hi = flow_bounds(series.H[t], linear=True)
    X = problem.grid.points
    ok = np.all((X >= lo) & (X <= hi), axis=1)
    ok &= X.sum(axis=1) - DEMAND_FRACTION * series.M[t] / K >= 0
    return ok
