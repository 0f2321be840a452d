"""Demand, head and degradation series for the compressor station.

CSV layout: header ``t,M,H,d1,d2,d3``, one row per time step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np

__all__ = [
    "CompressorTimeSeries",
    "SeriesParams",
    "TimeSeriesError",
    "generate_timeseries",
    "load_timeseries",
    "save_timeseries",
]

COLUMNS = ("t", "M", "H", "d1", "d2", "d3")


class TimeSeriesError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CompressorTimeSeries:
    """Per-step demand ``M`` (kg/s), head ``H`` (J/kg) and degradation."""

    t: np.ndarray
    M: np.ndarray
    H: np.ndarray
    d: np.ndarray   # shape (T, 3)

    def __post_init__(self):
        n = len(self.t)
        if not (len(self.M) == len(self.H) == self.d.shape[0] == n):
            raise TimeSeriesError("columns differ in length")
        if self.d.ndim != 2 or self.d.shape[1] != 3:
            raise TimeSeriesError("need three degradation columns")
        if np.any(self.M <= 0):
            raise TimeSeriesError("demand must be positive")
        if np.any(self.H <= 0):
            raise TimeSeriesError("head must be positive")
        if np.any(self.d < 0) or np.any(self.d >= 1):
            raise TimeSeriesError("degradation must lie in [0, 1)")

    def __len__(self) -> int:
        return len(self.t)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CompressorTimeSeries):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in
                   zip((self.t, self.M, self.H, self.d),
                       (other.t, other.M, other.H, other.d)))


def load_timeseries(path: Union[str, Path]) -> CompressorTimeSeries:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != COLUMNS:
            raise TimeSeriesError(
                f"{path}: expected header {','.join(COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(COLUMNS):
                raise TimeSeriesError(
                    f"{path}:{lineno}: expected {len(COLUMNS)} fields")
            try:
                rows.append([float(v) for v in row])
            except ValueError as err:
                raise TimeSeriesError(f"{path}:{lineno}: {err}") from None
    if not rows:
        raise TimeSeriesError(f"{path}: no data rows")
    a = np.array(rows)
    return CompressorTimeSeries(a[:, 0], a[:, 1], a[:, 2], a[:, 3:6])


def save_timeseries(series: CompressorTimeSeries,
                    path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for j in range(len(series)):
            w.writerow([repr(float(series.t[j])), repr(float(series.M[j])),
                        repr(float(series.H[j]))]
                       + [repr(float(v)) for v in series.d[j]])


@dataclass(frozen=True)
class SeriesParams:
    """Sinusoid-plus-trend demand and head, linear degradation ramps.

    The seed only shifts the sinusoid phases, so zero amplitudes give a
    series that does not depend on it.
    """

    demand_base: float = 450.0
    demand_amplitude: float = 40.0
    demand_period: float = 60.0
    demand_trend: float = 0.2
    head_base: float = 1.15e5
    head_amplitude: float = 1.2e4
    head_period: float = 120.0
    head_trend: float = 0.0
    degradation_start: Tuple[float, float, float] = (0.0, 0.02, 0.04)
    degradation_slope: Tuple[float, float, float] = (1e-3, 5e-4, 2e-4)


def generate_timeseries(params: SeriesParams, horizon: int,
                        seed: int = 0) -> CompressorTimeSeries:
    """Series covering ``t = 0..horizon``."""
    rng = np.random.default_rng(seed)
    phase_m, phase_h = rng.uniform(0.0, 0.25 * np.pi, size=2)
    t = np.arange(horizon + 1, dtype=float)
    M = (params.demand_base + params.demand_trend * t
         + params.demand_amplitude
         * np.sin(2 * np.pi * t / params.demand_period + phase_m))
    H = (params.head_base + params.head_trend * t
         + params.head_amplitude
         * np.sin(2 * np.pi * t / params.head_period + phase_h))
    d = (np.asarray(params.degradation_start)[None, :]
         + np.asarray(params.degradation_slope)[None, :] * t[:, None])
    d = np.clip(d, 0.0, 0.99)
    return CompressorTimeSeries(t, M, H, d)
