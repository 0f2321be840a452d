"""Command-line interface: run experiments, compare results, check configs.

Subcommands
-----------
run CONFIG
    Run every (variant, seed) pair and write ``<stem>.csv`` with one row
    per iteration plus ``<stem>.json`` with the summary, where ``stem`` is
    ``<problem>_<variant>_seed<seed>``.
compare SUMMARY.json SUMMARY.json [...]
    Percentage changes of the first result set against each of the others.
validate CONFIG
    List every problem with a config file without running anything.
emit-default-config
    Print the default config for a problem.

Exit codes: 0 on success (early termination of a run included), 1 on I/O
failures, 2 on invalid configs or inconsistent inputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import __version__
from .config import (PROBLEMS, ConfigError, RunConfig, default_config,
                     dump_config, load_config, parse_config, validate_config)
from .experiment import APPROX, RunResult, run_approx, run_variant
from .kernel import KernelSpec
from .metrics import IterationRecord
from .problems import (ProblemInstance, TimeSeriesError, SeriesParams,
                       compressor_problem, generate_timeseries,
                       load_timeseries, reference_lipschitz,
                       synthetic_problem)
from .safe_explore import AlgorithmSettings, LipschitzSchedule

__all__ = ["InputError", "build_problem", "compare_results", "main",
           "run_config"]

OUTPUT_ENV = "TVSAFEOPT_OUTPUT_DIR"
log = logging.getLogger("tvsafeopt")


class InputError(ValueError):
    """Result files that cannot be compared."""


# ---------------------------------------------------------------------------
# building runs from a config


def build_problem(config: RunConfig) -> ProblemInstance:
    if config.problem == "synthetic":
        kw = {} if config.grid_points is None else {"n": config.grid_points}
        problem = synthetic_problem(config.horizon, noise_std=config.noise_std,
                                    **kw)
    else:
        if config.series_path:
            series = load_timeseries(config.series_path)
        else:
            series = generate_timeseries(SeriesParams(), config.horizon,
                                         config.series_seed)
        kw = {} if config.grid_points is None else {"n": config.grid_points}
        problem = compressor_problem(series, config.horizon,
                                     noise_std=config.noise_std, **kw)
    if config.kernels is not None:
        problem = replace(problem, kernels=tuple(
            KernelSpec.spatio_temporal(s, t) for s, t in config.kernels))
    return problem


def lipschitz_for(config: RunConfig,
                  problem: ProblemInstance) -> LipschitzSchedule:
    """Reference constants, with any explicit values taking precedence."""
    spatial, temporal = config.lipschitz_spatial, config.lipschitz_temporal
    if spatial is None or temporal is None:
        ref = reference_lipschitz(problem, config.lipschitz_inflation)
        spatial = ref.spatial if spatial is None else spatial
        if temporal is None:
            return LipschitzSchedule(spatial, ref.temporal)
    return LipschitzSchedule.constant(spatial, temporal, config.horizon)


def _stem(problem: str, variant: str, seed: int) -> str:
    return f"{problem}_{variant}_seed{seed}"


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records(records: Sequence[IterationRecord], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(IterationRecord.columns())
        for r in records:
            w.writerow([_cell(v) for v in r.as_dict().values()])


def _json_safe(value):
    """Non-finite floats become null, recursively."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_json_safe(v) for v in value]
    return value


def run_config(config: RunConfig, out_dir: Path) -> List[Path]:
    """Execute every (variant, seed) pair; return the files written."""
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = build_problem(config)
    lipschitz = lipschitz_for(config, problem)
    beta = config.beta_schedule()
    effective = dump_config(replace(config, output_dir=str(out_dir)))
    written = []
    for seed in config.seeds:
        for variant in config.variants:
            log.info("running %s seed %d", variant, seed)
            result: RunResult
            if variant == APPROX:
                result = run_approx(problem, seed, config.horizon)
            else:
                settings = AlgorithmSettings.for_variant(
                    variant, problem.kernels, beta, lipschitz, config.policy)
                result = run_variant(problem, settings, seed, config.horizon)
            stem = _stem(config.problem, variant, seed)
            csv_path = out_dir / f"{stem}.csv"
            write_records(result.records, csv_path)
            summary = {k: _json_safe(v) for k, v in result.summary().items()}
            summary.update({
                "problem": config.problem,
                "horizon": config.horizon,
                "csv": csv_path.name,
                "version": __version__,
                "lipschitz_spatial": lipschitz.spatial,
                "lipschitz_temporal_max": max(lipschitz.temporal),
                "effective_config": effective,
            })
            json_path = out_dir / f"{stem}.json"
            json_path.write_text(json.dumps(summary, indent=2) + "\n",
                                 encoding="utf-8")
            written += [csv_path, json_path]
    return written


# ---------------------------------------------------------------------------
# comparing result sets


def _read_rows(path: Path) -> Dict[int, dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != IterationRecord.columns():
            raise InputError(f"{path}: unexpected CSV columns")
        return {int(row["k"]): row for row in reader}


def _pct_change(a: float, b: float) -> float:
    """``100 (a - b) / |b|``; zero when both are zero."""
    if a == b:
        return 0.0
    if b == 0:
        return math.copysign(math.inf, a - b)
    return 100.0 * (a - b) / abs(b)


def compare_results(paths: Sequence[Path]) -> dict:
    """Compare the first summary against every other one.

    Statistics are taken over the iterations present in all result sets:
    the total of ``unsafe_count``, the sum of ``instant_regret`` and the
    mean ``coverage_ratio``.
    """
    if len(paths) < 2:
        raise InputError("compare needs at least two result files")
    summaries, tables = [], []
    for p in paths:
        p = Path(p)
        summary = json.loads(p.read_text(encoding="utf-8"))
        missing = [k for k in ("csv", "variant", "problem", "horizon", "seed")
                   if k not in summary]
        if missing:
            raise InputError(f"{p}: summary lacks {', '.join(missing)}")
        summaries.append(summary)
        tables.append(_read_rows(p.parent / summary["csv"]))
    for key in ("problem", "horizon", "seed"):
        seen = {s.get(key) for s in summaries}
        if len(seen) > 1:
            raise InputError(f"result sets differ in {key}: "
                             f"{sorted(map(str, seen))}")
    common = sorted(set.intersection(*(set(t) for t in tables)))
    if not common:
        raise InputError("the result sets share no iterations")

    stats = []
    for summary, table in zip(summaries, tables):
        rows = [table[k] for k in common]
        stats.append({
            "variant": summary["variant"],
            "total_unsafe_count": sum(int(r["unsafe_count"]) for r in rows),
            "cumulative_regret": math.fsum(float(r["instant_regret"])
                                           for r in rows),
            "mean_coverage_ratio": math.fsum(float(r["coverage_ratio"])
                                             for r in rows) / len(rows),
        })
    base = stats[0]
    pairs = []
    for other in stats[1:]:
        pairs.append({
            "variant": base["variant"],
            "against": other["variant"],
            "unsafe_pct_change": _pct_change(base["total_unsafe_count"],
                                             other["total_unsafe_count"]),
            "regret_pct_change": _pct_change(base["cumulative_regret"],
                                             other["cumulative_regret"]),
            "coverage_pct_change": _pct_change(base["mean_coverage_ratio"],
                                               other["mean_coverage_ratio"]),
        })
    return {"problem": summaries[0]["problem"],
            "horizon": summaries[0]["horizon"],
            "seed": summaries[0]["seed"],
            "iterations": [common[0], common[-1], len(common)],
            "results": stats, "pairs": pairs}


def _format_comparison(report: dict) -> str:
    lines = [f"problem {report['problem']}, seed {report['seed']}, "
             f"{report['iterations'][2]} common iterations"]
    for s in report["results"]:
        lines.append(f"  {s['variant']:<16} unsafe {s['total_unsafe_count']:>9d}"
                     f"  regret {s['cumulative_regret']:12.6g}"
                     f"  coverage {s['mean_coverage_ratio']:.6g}")
    for p in report["pairs"]:
        lines.append(f"  {p['variant']} vs {p['against']}: "
                     f"unsafe {p['unsafe_pct_change']:+.2f}%, "
                     f"regret {p['regret_pct_change']:+.2f}%, "
                     f"coverage {p['coverage_pct_change']:+.2f}%")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# argument handling


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    changes = {}
    if args.seed:
        changes["seeds"] = tuple(args.seed)
    if args.horizon is not None:
        changes["horizon"] = args.horizon
    if args.variant:
        changes["variants"] = tuple(args.variant)
    return replace(config, **changes)


def _output_dir(config: RunConfig, override: Optional[str]) -> Path:
    if override:
        return Path(override)
    return Path(os.environ.get(OUTPUT_ENV) or config.output_dir)


def _cmd_run(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    problems = validate_config(config)
    if problems:
        raise ConfigError(problems)
    try:
        written = run_config(config, _output_dir(config, args.out))
    except TimeSeriesError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


def _cmd_compare(args) -> int:
    report = compare_results([Path(p) for p in args.results])
    print(_format_comparison(report))
    if args.json:
        Path(args.json).write_text(
            json.dumps(_json_safe(report), indent=2) + "\n",
                                   encoding="utf-8")
    return 0


def _cmd_validate(args) -> int:
    text = Path(args.config).read_text(encoding="utf-8")
    _config, diagnostics = parse_config(text, args.config)
    for d in diagnostics:
        print(d)
    return 2 if diagnostics else 0


def _cmd_emit(args) -> int:
    sys.stdout.write(dump_config(default_config(args.problem)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvsafeopt",
        description="Safe exploration for time-varying constrained "
                    "problems.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the configured experiments")
    p.add_argument("config", help="INI config file")
    p.add_argument("--seed", type=int, action="append",
                   help="seed to run (repeatable; replaces run.seeds)")
    p.add_argument("--horizon", type=int, help="replaces run.horizon")
    p.add_argument("--variant", action="append",
                   help="variant to run (repeatable; replaces run.variants)")
    p.add_argument("--out", help=f"output directory (overrides ${OUTPUT_ENV} "
                                 "and output.dir)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="compare result summaries")
    p.add_argument("results", nargs="+", help="summary JSON files")
    p.add_argument("--json", help="also write the comparison here")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("validate", help="check a config without running")
    p.add_argument("config")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("emit-default-config",
                       help="print the default config")
    p.add_argument("--problem", choices=PROBLEMS, default="synthetic")
    p.set_defaults(func=_cmd_emit)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InputError) as err:
        diagnostics = getattr(err, "diagnostics", [str(err)])
        for d in diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
