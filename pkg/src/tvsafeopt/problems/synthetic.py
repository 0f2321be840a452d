"""Two-dimensional benchmark with a drifting circular safe region."""

from __future__ import annotations

import numpy as np

from ..grid import DecisionGrid
from ..kernel import KernelSpec
from .base import ProblemInstance

__all__ = ["synthetic_problem", "synthetic_h", "disk_center"]

PERIOD = 50.0
DIRECTION = np.pi / 6


def disk_center(t):
    """Center of the unit safe disk at time ``t``."""
    s = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.asarray(t, dtype=float) / PERIOD))
    return -0.5 + s * np.cos(DIRECTION), 0.3 + s * np.sin(DIRECTION)


def synthetic_h(X: np.ndarray, t: float) -> np.ndarray:
    x, y = X[:, 0], X[:, 1]
    f = -np.exp(x ** 2) - np.log1p(y ** 2) + 0.01 * t
    cx, cy = disk_center(t)
    c = 1.0 - (x - cx) ** 2 - (y - cy) ** 2
    return np.stack([f, c], axis=1)


def synthetic_problem(horizon: int = 200, n: int = 100,
                      noise_std: float = 0.01) -> ProblemInstance:
    """Reward ``-exp(x^2) - log(1 + y^2) + 0.01 t`` on ``[-2, 2]^2``.

    The single constraint is the unit disk whose center moves away from
    ``(-0.5, 0.3)`` along a 30 degree ray and back with period 50. The seed
    is the grid point nearest ``(-0.5, 0.0)``.
    """
    grid = DecisionGrid.uniform([(-2.0, 2.0), (-2.0, 2.0)], [n, n])
    seed = grid.nearest((-0.5, 0.0))
    kernels = (KernelSpec.spatio_temporal(1.0, 25.0),
               KernelSpec.spatio_temporal(1.0, 15.0))
    return ProblemInstance("synthetic", grid, horizon, synthetic_h, 1,
                           np.array([seed]), noise_std, kernels)
