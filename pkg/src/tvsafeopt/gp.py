"""Exact Gaussian-process regression with homoscedastic noise.

Every output index gets its own zero-mean GP. Outputs that share a kernel
also share one Cholesky factor, since all outputs are observed at the same
inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import solve_triangular

from .kernel import KernelSpec, cross, gram, temporal_factor

__all__ = [
    "NumericalError",
    "ObservationSet",
    "PosteriorModel",
    "SpatialCache",
    "condition",
    "posterior",
    "posterior_batch",
    "posterior_cross_cov",
]

JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
_CHUNK = 32768


class NumericalError(ArithmeticError):
    """Cholesky factorization failed even after jitter escalation."""

    def __init__(self, output: int, message: str = ""):
        self.output = output
        super().__init__(message or
                         f"factorization failed for output index {output}")


@dataclass(frozen=True)
class ObservationSet:
    """Noisy observations of all outputs at a sequence of (x, t) inputs.

    ``Y[j, i]`` is the observation of output ``i`` at ``(X[j], times[j])``.
    The algorithm always observes every output jointly, so the per-output
    records share their inputs.
    """

    X: np.ndarray
    times: np.ndarray
    Y: np.ndarray
    noise_std: float = 0.01

    def __post_init__(self):
        if not self.noise_std > 0:
            raise ValueError("noise_std must be positive")
        X = np.asarray(self.X, dtype=float)
        times = np.asarray(self.times, dtype=float).reshape(-1)
        Y = np.asarray(self.Y, dtype=float)
        if X.ndim != 2 or Y.ndim != 2:
            raise ValueError("X and Y must be two-dimensional")
        if not (X.shape[0] == times.shape[0] == Y.shape[0]):
            raise ValueError("X, times and Y must have the same length")
        if np.any(times < 0):
            raise ValueError("observation times must be nonnegative")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "Y", Y)

    @classmethod
    def empty(cls, dim: int, n_outputs: int,
              noise_std: float = 0.01) -> "ObservationSet":
        return cls(np.zeros((0, dim)), np.zeros(0), np.zeros((0, n_outputs)),
                   noise_std)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.Y.shape[1]

    def append(self, x, t: float, y) -> "ObservationSet":
        x = np.asarray(x, dtype=float).reshape(1, -1)
        y = np.asarray(y, dtype=float).reshape(1, -1)
        return ObservationSet(np.vstack([self.X, x]),
                              np.append(self.times, float(t)),
                              np.vstack([self.Y, y]), self.noise_std)


@dataclass
class _Group:
    spec: KernelSpec
    outputs: Tuple[int, ...]
    chol: np.ndarray     # lower factor of K + noise^2 I (+ jitter)
    alpha: np.ndarray    # (n, len(outputs)) = (K + noise^2 I)^{-1} Y
    jitter: float = 0.0
    _inv: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def inv_chol(self) -> np.ndarray:
        """Inverse of the lower factor, computed once on first use."""
        if self._inv is None:
            n = self.chol.shape[0]
            self._inv = solve_triangular(self.chol, np.eye(n), lower=True,
                                         check_finite=False)
        return self._inv


@dataclass
class PosteriorModel:
    """GP posterior for all outputs given an :class:`ObservationSet`."""

    observations: ObservationSet
    kernels: Tuple[KernelSpec, ...]
    groups: List[_Group] = field(default_factory=list)
    _group_of: Dict[int, Tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        self._group_of = {}
        for g_idx, g in enumerate(self.groups):
            for col, i in enumerate(g.outputs):
                self._group_of[i] = (g_idx, col)

    @property
    def n_outputs(self) -> int:
        return len(self.kernels)

    def extend(self, x, t: float, y) -> "PosteriorModel":
        """Condition on one more joint observation.

        Appends a row to each Cholesky factor instead of refactorizing;
        falls back to a full :func:`condition` if the new pivot is not
        positive.
        """
        obs = self.observations.append(x, t, y)
        if len(self.observations) == 0:
            return condition(obs, self.kernels)
        x = obs.X[-1:]
        noise2 = obs.noise_std ** 2
        groups = []
        for g in self.groups:
            k_new = cross(g.spec, self.observations.X,
                          self.observations.times, x, t)[:, 0]
            l21 = solve_triangular(g.chol, k_new, lower=True)
            pivot = 1.0 + noise2 + g.jitter - l21 @ l21
            if not pivot > 0:
                return condition(obs, self.kernels)
            n = g.chol.shape[0]
            chol = np.zeros((n + 1, n + 1))
            chol[:n, :n] = g.chol
            chol[n, :n] = l21
            chol[n, n] = np.sqrt(pivot)
            alpha = _cho_solve(chol, obs.Y[:, list(g.outputs)])
            inv = None
            if g._inv is not None:
                inv = np.zeros((n + 1, n + 1))
                inv[:n, :n] = g._inv
                inv[n, :n] = -(l21 @ g._inv) / chol[n, n]
                inv[n, n] = 1.0 / chol[n, n]
            groups.append(_Group(g.spec, g.outputs, chol, alpha, g.jitter,
                                 inv))
        return PosteriorModel(obs, self.kernels, groups)


def _cho_solve(chol: np.ndarray, b: np.ndarray) -> np.ndarray:
    z = solve_triangular(chol, b, lower=True)
    return solve_triangular(chol.T, z, lower=False)


def _normalize_kernels(kernels, n_outputs: int) -> Tuple[KernelSpec, ...]:
    if isinstance(kernels, KernelSpec):
        return (kernels,) * n_outputs
    kernels = tuple(kernels)
    if len(kernels) != n_outputs:
        raise ValueError(
            f"{len(kernels)} kernels given for {n_outputs} outputs")
    return kernels


def condition(observations: ObservationSet,
              kernels: Union[KernelSpec, Sequence[KernelSpec]]
              ) -> PosteriorModel:
    """Condition independent per-output GPs on ``observations``.

    Raises
    ------
    NumericalError
        If ``K + noise^2 I`` cannot be factorized with jitter up to 1e-6.
    """
    kernels = _normalize_kernels(kernels, observations.n_outputs)
    by_spec: Dict[KernelSpec, List[int]] = {}
    for i, spec in enumerate(kernels):
        by_spec.setdefault(spec, []).append(i)

    groups = []
    n = len(observations)
    if n == 0:
        return PosteriorModel(observations, kernels, groups)
    noise2 = observations.noise_std ** 2
    for spec, outputs in by_spec.items():
        K = gram(spec, observations.X, observations.times)
        for jitter in JITTERS:
            try:
                chol = np.linalg.cholesky(
                    K + (noise2 + jitter) * np.eye(n))
                break
            except np.linalg.LinAlgError:
                continue
        else:
            raise NumericalError(outputs[0])
        alpha = _cho_solve(chol, observations.Y[:, outputs])
        groups.append(_Group(spec, tuple(outputs), chol, alpha, jitter))
    return PosteriorModel(observations, kernels, groups)


class SpatialCache:
    """Spatial kernel columns between fixed query points and the data.

    Observations only ever grow by appending, so the columns for earlier
    data points can be reused from one iteration to the next. Each
    lengthscale keeps its own block; a data prefix that no longer matches
    triggers a rebuild.
    """

    def __init__(self, X):
        self.X = np.atleast_2d(np.asarray(X, dtype=float))
        self._store: Dict[float, Tuple[np.ndarray, np.ndarray]] = {}

    def columns(self, lengthscale: float, data: np.ndarray) -> np.ndarray:
        """Return the (N, n) spatial kernel against the ``n`` data rows."""
        n = data.shape[0]
        buf, seen = self._store.get(lengthscale, (None, None))
        m = 0 if seen is None else seen.shape[0]
        if (buf is None or m > n
                or not np.array_equal(seen, data[:m])):
            buf, seen, m = np.empty((self.X.shape[0], max(8, n))), data[:0], 0
        if n > m:
            if n > buf.shape[1]:
                grown = np.empty((buf.shape[0], max(n, 2 * buf.shape[1])))
                grown[:, :m] = buf[:, :m]
                buf = grown
            buf[:, m:n] = cross(KernelSpec.spatial(lengthscale), self.X, 0.0,
                                data[m:n], 0.0)
            seen = data.copy()
        self._store[lengthscale] = (buf, seen)
        return buf[:, :n]


def posterior_batch(model: PosteriorModel, X, t,
                    outputs: Optional[Sequence[int]] = None,
                    cache: Optional[SpatialCache] = None
                    ) -> Tuple[np.ndarray, np.ndarray]:
    """Posterior mean and standard deviation at many query points.

    Parameters
    ----------
    X : array, shape (N, d)
    t : float or array of shape (N,)
        Query time(s).
    outputs : sequence of int, optional
        Output indices to evaluate; all by default.
    cache : SpatialCache, optional
        Reused spatial kernel columns; its points must equal ``X``.

    Returns
    -------
    mean, std : arrays of shape (N, len(outputs))
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N = X.shape[0]
    if outputs is None:
        outputs = range(model.n_outputs)
    outputs = list(outputs)
    mean = np.zeros((N, len(outputs)))
    std = np.ones((N, len(outputs)))
    if not model.groups:
        return mean, std
    if cache is not None and cache.X.shape != X.shape:
        raise ValueError("cache was built for different query points")
    scalar_t = np.ndim(t) == 0
    if not scalar_t:
        t = np.broadcast_to(np.asarray(t, dtype=float), (N,))
    obs = model.observations
    n = len(obs)
    for g_idx, g in enumerate(model.groups):
        cols = [(j, model._group_of[i][1]) for j, i in enumerate(outputs)
                if model._group_of[i][0] == g_idx]
        if not cols:
            continue
        dst = [j for j, _ in cols]
        src = [c for _, c in cols]
        spatial = (None if cache is None else
                   cache.columns(g.spec.spatial_lengthscale, obs.X))
        for lo in range(0, N, _CHUNK):
            hi = min(lo + _CHUNK, N)
            tq = t if scalar_t else t[lo:hi]
            if spatial is None:
                kq = cross(g.spec, X[lo:hi], tq, obs.X, obs.times)
            else:
                kq = spatial[lo:hi] * temporal_factor(
                    g.spec, tq, obs.times, hi - lo, n)
            mean[lo:hi, dst] = kq @ g.alpha[:, src]
            v = kq @ g.inv_chol.T
            var = 1.0 - np.einsum("ij,ij->i", v, v)
            # clamp rounding noise; genuinely negative variances are bugs
            var[var < 0.0] = 0.0
            std[lo:hi, dst] = np.sqrt(var)[:, None]
    return mean, std


def posterior(model: PosteriorModel, x, t: float,
              i: int) -> Tuple[float, float]:
    """Posterior mean and standard deviation of output ``i`` at ``(x, t)``."""
    mean, std = posterior_batch(model, np.atleast_1d(x)[None, :], t, [i])
    return float(mean[0, 0]), float(std[0, 0])


def posterior_cross_cov(model: PosteriorModel, i: int, Xa, ta, Xb,
                        tb) -> np.ndarray:
    """Posterior covariance of output ``i`` between two query sets."""
    Xa = np.atleast_2d(np.asarray(Xa, dtype=float))
    Xb = np.atleast_2d(np.asarray(Xb, dtype=float))
    spec = model.kernels[i]
    prior = cross(spec, Xa, ta, Xb, tb)
    if not model.groups:
        return prior
    g = model.groups[model._group_of[i][0]]
    obs = model.observations
    va = solve_triangular(g.chol, cross(spec, Xa, ta, obs.X, obs.times).T,
                          lower=True, check_finite=False)
    vb = solve_triangular(g.chol, cross(spec, Xb, tb, obs.X, obs.times).T,
                          lower=True, check_finite=False)
    return prior - va.T @ vb
