"""Benchmark problems with ground-truth oracles."""

from .base import ProblemInstance, reference_lipschitz
from .compressor import (NoFeasiblePoint, approx_optimization_baseline,
                         compressor_problem, linearized_feasible)
from .synthetic import synthetic_problem
from .timeseries import (CompressorTimeSeries, SeriesParams, TimeSeriesError,
                         generate_timeseries, load_timeseries, save_timeseries)

__all__ = [
    "CompressorTimeSeries",
    "NoFeasiblePoint",
    "ProblemInstance",
    "SeriesParams",
    "TimeSeriesError",
    "approx_optimization_baseline",
    "compressor_problem",
    "generate_timeseries",
    "linearized_feasible",
    "load_timeseries",
    "reference_lipschitz",
    "save_timeseries",
    "synthetic_problem",
]
