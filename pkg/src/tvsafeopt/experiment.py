"""Seeded runs that turn algorithm states into metric records."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .metrics import (IterationRecord, optimal_reward, regret_update,
                      safety_metrics)
from .problems import ProblemInstance
from .problems.compressor import linearized_feasible
from .safe_explore import AlgorithmSettings, run

__all__ = ["APPROX", "RunResult", "noise_stream", "run_approx",
           "run_variant"]

APPROX = "approx-baseline"


def noise_stream(seed: int) -> np.random.Generator:
    """Observation-noise generator for ``seed``.

    Derived from the seed alone (PCG64 via ``SeedSequence(seed)``, first
    spawned child), so every variant run with the same seed sees the same
    noise draws in the same order.
    """
    noise, _sampling = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(noise)


@dataclass
class RunResult:
    variant: str
    seed: int
    records: List[IterationRecord]
    terminated_at: Optional[int] = None
    inconsistent_cells: int = 0
    violations: int = 0
    extra: Dict[str, object] = field(default_factory=dict)

    @property
    def cumulative_regret(self) -> float:
        return self.records[-1].cumulative_regret if self.records else 0.0

    @property
    def total_unsafe(self) -> int:
        return sum(r.unsafe_count for r in self.records)

    @property
    def mean_coverage(self) -> float:
        rows = [r.coverage_ratio for r in self.records]
        return float(np.mean(rows)) if rows else 0.0

    def summary(self) -> dict:
        return {
            "variant": self.variant,
            "seed": self.seed,
            "iterations": len(self.records),
            "terminated_at": self.terminated_at,
            "total_unsafe_count": self.total_unsafe,
            "mean_coverage_ratio": self.mean_coverage,
            "cumulative_regret": self.cumulative_regret,
            "violation_steps": self.violations,
            "inconsistent_cells": self.inconsistent_cells,
        }


def _fmt(grid, idx) -> str:
    return "" if idx is None else grid.format_point(idx)


def run_variant(problem: ProblemInstance, settings: AlgorithmSettings,
                seed: int, horizon: Optional[int] = None,
                keep_states: bool = False) -> RunResult:
    """Run one algorithm variant and score every iteration.

    With ``keep_states`` the raw states are kept in ``extra["states"]``
    (memory heavy on large grids).
    """
    rng = noise_stream(seed)
    grid = problem.grid
    records: List[IterationRecord] = []
    states = []
    cum = 0.0
    result = RunResult(settings.variant, seed, records)
    for state in run(problem, settings, rng, horizon):
        t = state.t
        values = problem.values(t)
        truth = np.all(values[:, 1:] >= 0, axis=1)
        unsafe, ratio, coverage = safety_metrics(state.safe, truth)
        best = optimal_reward(values[:, 0], truth)
        if state.terminated:
            found = evaluated = math.nan
            instant = 0.0
            result.terminated_at = state.k
        else:
            found = float(values[state.x_hat, 0])
            evaluated = float(values[state.x_k, 0])
            instant, cum = regret_update(cum, best, found)
            if not truth[state.x_k]:
                result.violations += 1
        records.append(IterationRecord(
            state.k, t, settings.variant, seed, int(state.safe.sum()),
            unsafe, ratio, coverage, _fmt(grid, state.x_k),
            _fmt(grid, state.x_hat), found, evaluated, best, instant, cum,
            state.terminated))
        result.inconsistent_cells = state.inconsistent_cells
        if keep_states:
            states.append(state)
    if keep_states:
        result.extra["states"] = states
    return result


def run_approx(problem: ProblemInstance, seed: int,
               horizon: Optional[int] = None) -> RunResult:
    """Score the linearized-envelope baseline at every time step.

    Its "safe set" is the linearized feasible set. Steps without a
    feasible grid point count as violations and add no regret.
    """
    horizon = problem.horizon if horizon is None else horizon
    grid = problem.grid
    records: List[IterationRecord] = []
    result = RunResult(APPROX, seed, records)
    cum = 0.0
    for t in range(horizon + 1):
        values = problem.values(t)
        truth = np.all(values[:, 1:] >= 0, axis=1)
        safe = linearized_feasible(problem, t)
        unsafe, ratio, coverage = safety_metrics(safe, truth)
        best = optimal_reward(values[:, 0], truth)
        if safe.any():
            idx = np.flatnonzero(safe)
            x = int(idx[np.argmax(values[idx, 0])])
            found = float(values[x, 0])
            instant, cum = regret_update(cum, best, found)
            if not truth[x]:
                result.violations += 1
        else:
            x, found, instant = None, math.nan, 0.0
            result.violations += 1
        records.append(IterationRecord(
            t, t, APPROX, seed, int(safe.sum()), unsafe, ratio, coverage,
            _fmt(grid, x), _fmt(grid, x), found, found, best, instant, cum,
            False))
    return result
