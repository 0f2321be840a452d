"""Squared-exponential covariance functions over (decision, time) pairs.

All kernels here have a unit diagonal, so the prior standard deviation of
every output is one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

__all__ = ["KernelSpec", "eval_kernel", "cross", "gram", "temporal_factor"]

SPATIAL = "spatial"
SPATIO_TEMPORAL = "spatio-temporal"


@dataclass(frozen=True)
class KernelSpec:
    """Hyperparameters of a product squared-exponential kernel.

    Parameters
    ----------
    spatial_lengthscale : float
        Lengthscale in decision-space units.
    temporal_lengthscale : float
        Lengthscale in time steps. ``math.inf`` makes the temporal factor
        identically one. Ignored in spatial-only mode.
    mode : str
        ``"spatial"`` or ``"spatio-temporal"``.
    """

    spatial_lengthscale: float = 1.0
    temporal_lengthscale: float = math.inf
    mode: str = SPATIO_TEMPORAL

    def __post_init__(self):
        if self.mode not in (SPATIAL, SPATIO_TEMPORAL):
            raise ValueError(f"unknown kernel mode {self.mode!r}")
        if not self.spatial_lengthscale > 0:
            raise ValueError("spatial_lengthscale must be positive")
        if self.mode == SPATIO_TEMPORAL and not self.temporal_lengthscale > 0:
            raise ValueError("temporal_lengthscale must be positive")

    @classmethod
    def spatial(cls, lengthscale: float = 1.0) -> "KernelSpec":
        return cls(spatial_lengthscale=lengthscale, mode=SPATIAL)

    @classmethod
    def spatio_temporal(cls, spatial: float, temporal: float) -> "KernelSpec":
        return cls(spatial_lengthscale=spatial, temporal_lengthscale=temporal,
                   mode=SPATIO_TEMPORAL)

    @property
    def uses_time(self) -> bool:
        return self.mode == SPATIO_TEMPORAL and math.isfinite(
            self.temporal_lengthscale)


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(1, -1)
    return x


def cross(spec: KernelSpec, xa, ta, xb, tb) -> np.ndarray:
    """Kernel matrix between two point sets.

    ``xa`` has shape (n, d), ``ta`` is a scalar or shape (n,); likewise for
    the second set. Returns an (n, m) array.
    """
    xa = _as_points(xa)
    xb = _as_points(xb)
    if xa.shape[1] != xb.shape[1]:
        raise ValueError(
            f"dimension mismatch: {xa.shape[1]} vs {xb.shape[1]}")
    k = cdist(xa, xb, "sqeuclidean")
    k *= -0.5 / spec.spatial_lengthscale ** 2
    np.exp(k, out=k)
    if spec.uses_time:
        k *= temporal_factor(spec, ta, tb, xa.shape[0], xb.shape[0])
    return k


def temporal_factor(spec: KernelSpec, ta, tb, na: int, nb: int):
    """Temporal part of :func:`cross`, broadcastable to (na, nb).

    A scalar time on either side yields a single row or column instead of
    a full matrix.
    """
    if not spec.uses_time:
        return 1.0
    scale = -0.5 / spec.temporal_lengthscale ** 2
    ta = np.asarray(ta, dtype=float)
    tb = np.asarray(tb, dtype=float)
    a = np.broadcast_to(ta.reshape(-1), (na,))[:, None] if ta.ndim else ta
    b = np.broadcast_to(tb.reshape(-1), (nb,))[None, :] if tb.ndim else tb
    dt = a - b
    return np.exp(dt * dt * scale)


def eval_kernel(spec: KernelSpec, a: Tuple[Sequence[float], float],
                b: Tuple[Sequence[float], float]) -> float:
    """Evaluate the kernel on two ``(decision, time)`` pairs."""
    (xa, ta), (xb, tb) = a, b
    xa = np.atleast_1d(np.asarray(xa, dtype=float))
    xb = np.atleast_1d(np.asarray(xb, dtype=float))
    if xa.shape != xb.shape:
        raise ValueError(f"dimension mismatch: {xa.shape} vs {xb.shape}")
    return float(cross(spec, xa, ta, xb, tb)[0, 0])


def gram(spec: KernelSpec, points, times) -> np.ndarray:
    """Symmetric kernel matrix of a point set with itself."""
    points = _as_points(points)
    if points.shape[0] == 0:
        raise ValueError("gram needs at least one point")
    k = cross(spec, points, times, points, times)
    # exact symmetry and unit diagonal regardless of rounding in cdist
    k = 0.5 * (k + k.T)
    np.fill_diagonal(k, 1.0)
    return k
