"""Problem container and reference Lipschitz estimation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from ..grid import DecisionGrid
from ..kernel import KernelSpec
from ..safe_explore import LipschitzSchedule

__all__ = ["ProblemInstance", "reference_lipschitz"]

LIPSCHITZ_INFLATION = 1.1


@dataclass(eq=False)
class ProblemInstance:
    """A time-varying constrained problem on a finite grid.

    ``h(X, t)`` returns an (N, m + 1) array: column 0 is the reward and
    columns 1..m the constraints, where ``c_i >= 0`` means safe.
    """

    name: str
    grid: DecisionGrid
    horizon: int
    h: Callable[[np.ndarray, int], np.ndarray]
    n_constraints: int
    safe_seed: np.ndarray
    noise_std: float = 0.01
    kernels: Tuple[KernelSpec, ...] = ()
    meta: Dict[str, object] = field(default_factory=dict)
    _lipschitz: Optional[LipschitzSchedule] = field(default=None, repr=False)

    def __post_init__(self):
        self.safe_seed = np.atleast_1d(np.asarray(self.safe_seed, dtype=int))
        if self.safe_seed.size == 0:
            raise ValueError("the seed set must not be empty")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        c0 = self.constraints_at(0)[self.safe_seed]
        if not np.all(c0 > 0):
            raise ValueError("seed decisions must strictly satisfy all "
                             "constraints at t = 0")

    @property
    def n_outputs(self) -> int:
        return self.n_constraints + 1

    def values(self, t: int, idx=None) -> np.ndarray:
        """Noise-free outputs on the grid (or at grid indices ``idx``)."""
        pts = self.grid.points if idx is None else \
            self.grid.points[np.atleast_1d(idx)]
        return np.asarray(self.h(pts, t), dtype=float)

    def reward_at(self, t: int) -> np.ndarray:
        return self.values(t)[:, 0]

    def constraints_at(self, t: int) -> np.ndarray:
        return self.values(t)[:, 1:]

    def feasible(self, t: int) -> np.ndarray:
        """Ground-truth safe region as a mask over the grid."""
        return np.all(self.constraints_at(t) >= 0, axis=1)

    def evaluate_noisy(self, x: int, t: int,
                       rng: np.random.Generator) -> np.ndarray:
        """All outputs at grid index ``x`` plus i.i.d. Gaussian noise."""
        y = self.values(t, x)[0]
        return y + rng.normal(0.0, self.noise_std, size=y.shape)

    @property
    def lipschitz(self) -> LipschitzSchedule:
        """Reference constants from exhaustive finite differences."""
        if self._lipschitz is None:
            self._lipschitz = reference_lipschitz(self)
        return self._lipschitz

    def frozen(self, t0: int = 0, horizon: Optional[int] = None
               ) -> "ProblemInstance":
        """Stationary copy whose outputs are fixed at time ``t0``."""
        h = self.h
        frozen_h = lambda X, t: h(X, t0)  # noqa: E731
        return replace(self, name=f"{self.name}@{t0}", h=frozen_h,
                       horizon=self.horizon if horizon is None else horizon,
                       _lipschitz=None)


def _gradient_norm(values: np.ndarray, grid: DecisionGrid) -> float:
    """Largest forward-difference gradient norm over the grid."""
    v = values.reshape(grid.shape)
    sq = np.zeros(tuple(max(n - 1, 1) for n in grid.shape))
    for axis, coords in enumerate(grid.axes):
        if coords.size < 2:
            continue
        d = np.diff(v, axis=axis) / np.diff(coords).reshape(
            [-1 if j == axis else 1 for j in range(grid.dim)])
        sl = tuple(slice(0, max(n - 1, 1)) for n in grid.shape)
        sq = sq + d[sl] ** 2
    return float(np.sqrt(sq.max()))


def reference_lipschitz(problem: ProblemInstance,
                        inflation: float = LIPSCHITZ_INFLATION
                        ) -> LipschitzSchedule:
    """Estimate Lipschitz constants on the grid and inflate them.

    The temporal bound at ``t`` is the largest change of any output between
    ``t`` and ``t + 1``. The spatial constant is taken over constraint
    outputs only, since the reward never enters a Lipschitz test.
    """
    temporal = []
    spatial = 0.0
    cur = problem.values(0)
    for t in range(problem.horizon + 1):
        for i in range(1, problem.n_outputs):
            spatial = max(spatial, _gradient_norm(cur[:, i], problem.grid))
        if t < problem.horizon:
            nxt = problem.values(t + 1)
            temporal.append(float(np.abs(nxt - cur).max()) * inflation)
            cur = nxt
    return LipschitzSchedule(spatial * inflation, tuple(temporal))
