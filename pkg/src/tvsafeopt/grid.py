"""Finite, quantized decision sets."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

__all__ = ["DecisionGrid"]


@dataclass(frozen=True, eq=False)
class DecisionGrid:
    """Cartesian product of per-axis coordinates with Euclidean distance.

    Points are flattened in C order (last axis fastest). ``scale`` converts
    decision coordinates to physical units for reporting.
    """

    axes: Tuple[np.ndarray, ...]
    scale: float = 1.0

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float).reshape(-1) for a in self.axes)
        if not axes or any(a.size == 0 for a in axes):
            raise ValueError("every axis needs at least one coordinate")
        for a in axes:
            if np.any(np.diff(a) <= 0):
                raise ValueError("axis coordinates must be increasing")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def uniform(cls, bounds: Sequence[Tuple[float, float]],
                counts: Sequence[int], scale: float = 1.0) -> "DecisionGrid":
        """Uniform grid including both bounds on every axis."""
        if len(bounds) != len(counts):
            raise ValueError("bounds and counts differ in length")
        return cls(tuple(np.linspace(lo, hi, n)
                         for (lo, hi), n in zip(bounds, counts)), scale)

    @classmethod
    def from_points(cls, values: Sequence[float]) -> "DecisionGrid":
        """One-dimensional grid, mostly for small hand-built instances."""
        return cls((np.asarray(values, dtype=float),))

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(a.size for a in self.axes)

    @property
    def dim(self) -> int:
        return len(self.axes)

    def __len__(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    @property
    def lower(self) -> np.ndarray:
        return np.array([a[0] for a in self.axes])

    @property
    def upper(self) -> np.ndarray:
        return np.array([a[-1] for a in self.axes])

    def nearest(self, x: Sequence[float]) -> int:
        """Index of the grid point closest to ``x`` (lowest index on ties)."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dim:
            raise ValueError(f"expected {self.dim} coordinates")
        idx = [int(np.argmin(np.abs(a - v))) for a, v in zip(self.axes, x)]
        return int(np.ravel_multi_index(idx, self.shape))

    def distance(self, a: int, b: int) -> float:
        return float(np.linalg.norm(self.points[a] - self.points[b]))

    def distances_from(self, idx) -> np.ndarray:
        return cdist(self.points[np.atleast_1d(idx)], self.points)

    def format_point(self, idx: int) -> str:
        """Semicolon-joined coordinates in physical units."""
        return ";".join(repr(float(v)) for v in self.points[idx] * self.scale)
