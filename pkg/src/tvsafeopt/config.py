"""Run configuration: INI parsing, validation and emission.

A configuration file has the sections ``[run]``, ``[beta]``,
``[lipschitz]``, ``[kernels]``, ``[compressor]`` and ``[output]``; every
key is optional and falls back to the defaults below. Emitting a config
and parsing the result gives an equal :class:`RunConfig`.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Tuple, Union

from .confidence import FALLBACK, STRICT, BetaSchedule
from .experiment import APPROX
from .safe_explore import VARIANTS

__all__ = [
    "ConfigError",
    "PROBLEMS",
    "RunConfig",
    "default_config",
    "dump_config",
    "load_config",
    "parse_config",
    "validate_config",
]

PROBLEMS = ("synthetic", "compressor")
ALL_VARIANTS = VARIANTS + (APPROX,)
N_OUTPUTS = {"synthetic": 2, "compressor": 8}
DEFAULT_HORIZON = {"synthetic": 200, "compressor": 100}
DEFAULT_GRID = {"synthetic": 100, "compressor": 60}


class ConfigError(ValueError):
    """Raised with the full list of diagnostics for an invalid config."""

    def __init__(self, diagnostics: List[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


@dataclass(frozen=True)
class RunConfig:
    """All experiment knobs.

    ``None`` in ``grid_points``, ``kernels``, ``lipschitz_spatial`` or
    ``lipschitz_temporal`` means "use the problem's reference value".
    Kernels are ``(spatial, temporal)`` lengthscale pairs, one per output
    (reward first).
    """

    problem: str = "synthetic"
    variants: Tuple[str, ...] = ("tvsafeopt", "safeopt")
    seeds: Tuple[int, ...] = (0,)
    horizon: int = 200
    grid_points: Optional[int] = None
    noise_std: float = 0.01
    policy: str = FALLBACK
    beta_mode: str = "fixed"
    sqrt_beta: float = 2.0
    rkhs_bound: float = 1.0
    beta_sigma: float = 0.01
    delta: float = 0.1
    capacity: float = 0.0
    lipschitz_spatial: Optional[float] = None
    lipschitz_temporal: Optional[float] = None
    lipschitz_inflation: float = 1.1
    kernels: Optional[Tuple[Tuple[float, float], ...]] = None
    series_path: str = ""
    series_seed: int = 0
    output_dir: str = "results"

    def beta_schedule(self) -> BetaSchedule:
        return BetaSchedule(self.beta_mode, self.sqrt_beta, self.rkhs_bound,
                            self.beta_sigma, self.delta, self.capacity)


def default_config(problem: str = "synthetic") -> RunConfig:
    if problem not in PROBLEMS:
        raise ValueError(f"unknown problem {problem!r}")
    variants = (("tvsafeopt", "safeopt", APPROX) if problem == "compressor"
                else ("tvsafeopt", "safeopt"))
    return RunConfig(problem=problem, variants=variants,
                     horizon=DEFAULT_HORIZON[problem])


# (field, section, key, kind)
_LAYOUT = (
    ("problem", "run", "problem", "str"),
    ("variants", "run", "variants", "strs"),
    ("seeds", "run", "seeds", "ints"),
    ("horizon", "run", "horizon", "int"),
    ("grid_points", "run", "grid_points", "int?"),
    ("noise_std", "run", "noise_std", "float"),
    ("policy", "run", "policy", "str"),
    ("beta_mode", "beta", "mode", "str"),
    ("sqrt_beta", "beta", "sqrt_beta", "float"),
    ("rkhs_bound", "beta", "rkhs_bound", "float"),
    ("beta_sigma", "beta", "sigma", "float"),
    ("delta", "beta", "delta", "float"),
    ("capacity", "beta", "capacity", "float"),
    ("lipschitz_spatial", "lipschitz", "spatial", "float?"),
    ("lipschitz_temporal", "lipschitz", "temporal", "float?"),
    ("lipschitz_inflation", "lipschitz", "inflation", "float"),
    ("series_path", "compressor", "series", "str"),
    ("series_seed", "compressor", "series_seed", "int"),
    ("output_dir", "output", "dir", "str"),
)
_SECTIONS = ("run", "beta", "lipschitz", "kernels", "compressor", "output")
_AUTO = "auto"


def _split(text: str) -> List[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def _convert(kind: str, text: str):
    text = text.strip()
    if kind.endswith("?"):
        if text.lower() in (_AUTO, ""):
            return None
        kind = kind[:-1]
    if kind == "str":
        return text
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    if kind == "strs":
        return tuple(_split(text))
    if kind == "ints":
        return tuple(int(p) for p in _split(text))
    raise AssertionError(kind)


def _render(kind: str, value) -> str:
    if value is None:
        return _AUTO
    if kind.rstrip("?") == "float":
        return repr(float(value))
    if kind in ("strs", "ints"):
        return ", ".join(str(v) for v in value)
    return str(value)


def _parse_kernels(section, diagnostics: List[str]):
    keys = sorted(section.keys(), key=lambda k: (len(k), k))
    if not keys:
        return None
    pairs = []
    for pos, key in enumerate(keys):
        where = f"kernels.{key}"
        if key != f"output{pos}":
            diagnostics.append(f"{where}: expected keys output0, output1, "
                               "... in order")
            return None
        try:
            parts = [float(p) for p in _split(section[key])]
        except ValueError as err:
            diagnostics.append(f"{where}: {err}")
            return None
        if len(parts) != 2:
            diagnostics.append(f"{where}: expected 'spatial, temporal'")
            return None
        pairs.append((parts[0], parts[1]))
    return tuple(pairs)


def parse_config(text: str, source: str = "<config>"
                 ) -> Tuple[RunConfig, List[str]]:
    """Parse INI text leniently.

    Returns the config (defaults substituted for unreadable values) and
    every diagnostic found, including :func:`validate_config` ones.
    """
    cp = configparser.ConfigParser(interpolation=None)
    diagnostics: List[str] = []
    try:
        cp.read_string(text, source=source)
    except configparser.Error as err:
        return RunConfig(), [f"{source}: {err}".replace("\n", " ")]
    for name in cp.sections():
        if name not in _SECTIONS:
            diagnostics.append(f"[{name}]: unknown section")
    known = {(sec, key) for _, sec, key, _ in _LAYOUT}
    for sec in _SECTIONS:
        if sec == "kernels" or not cp.has_section(sec):
            continue
        for key in cp[sec]:
            if (sec, key) not in known:
                diagnostics.append(f"{sec}.{key}: unknown key")

    problem = cp.get("run", "problem", fallback="synthetic").strip()
    base = default_config(problem) if problem in PROBLEMS else RunConfig()
    values = {}
    for name, sec, key, kind in _LAYOUT:
        if cp.has_option(sec, key):
            try:
                values[name] = _convert(kind, cp.get(sec, key))
            except ValueError as err:
                diagnostics.append(f"{sec}.{key}: {err}")
    if cp.has_section("kernels"):
        values["kernels"] = _parse_kernels(cp["kernels"], diagnostics)
    config = replace(base, **values)
    diagnostics += validate_config(config)
    return config, diagnostics


def validate_config(config: RunConfig) -> List[str]:
    """Every rule the config violates, one message per violation."""
    out = []
    if config.problem not in PROBLEMS:
        out.append(f"run.problem: must be one of {', '.join(PROBLEMS)}")
    if not config.variants:
        out.append("run.variants: at least one variant is required")
    for v in config.variants:
        if v not in ALL_VARIANTS:
            out.append(f"run.variants: unknown variant {v!r}")
    if len(set(config.variants)) != len(config.variants):
        out.append("run.variants: duplicate variant")
    if APPROX in config.variants and config.problem != "compressor":
        out.append(f"run.variants: {APPROX} needs the compressor problem")
    if not config.seeds:
        out.append("run.seeds: at least one seed is required")
    if any(s < 0 for s in config.seeds):
        out.append("run.seeds: seeds must be nonnegative")
    if config.horizon < 1:
        out.append("run.horizon: must be at least 1")
    if config.grid_points is not None and config.grid_points < 2:
        out.append("run.grid_points: must be at least 2")
    if not (config.noise_std > 0 and math.isfinite(config.noise_std)):
        out.append("run.noise_std: must be positive")
    if config.policy not in (FALLBACK, STRICT):
        out.append(f"run.policy: must be {FALLBACK} or {STRICT}")
    if config.beta_mode not in ("fixed", "theoretical"):
        out.append("beta.mode: must be fixed or theoretical")
    elif config.beta_mode == "fixed" and not config.sqrt_beta > 0:
        out.append("beta.sqrt_beta: must be positive")
    elif config.beta_mode == "theoretical":
        if not config.rkhs_bound > 0:
            out.append("beta.rkhs_bound: must be positive")
        if not config.beta_sigma > 0:
            out.append("beta.sigma: must be positive")
        if not 0 < config.delta < 1:
            out.append("beta.delta: must lie in (0, 1)")
        if not config.capacity >= 0:
            out.append("beta.capacity: must be nonnegative")
    for name, key in (("lipschitz_spatial", "spatial"),
                      ("lipschitz_temporal", "temporal")):
        value = getattr(config, name)
        if value is not None and not value >= 0:
            out.append(f"lipschitz.{key}: must be nonnegative")
    if not config.lipschitz_inflation >= 1:
        out.append("lipschitz.inflation: must be at least 1")
    if config.kernels is not None:
        want = N_OUTPUTS.get(config.problem)
        if want is not None and len(config.kernels) != want:
            out.append(f"kernels: {config.problem} needs {want} entries, "
                       f"got {len(config.kernels)}")
        for pos, (sp, tm) in enumerate(config.kernels):
            if not (sp > 0 and tm > 0):
                out.append(f"kernels.output{pos}: lengthscales must be "
                           "positive")
    if config.series_path and config.problem != "compressor":
        out.append("compressor.series: only used by the compressor problem")
    if config.series_seed < 0:
        out.append("compressor.series_seed: must be nonnegative")
    if not config.output_dir:
        out.append("output.dir: must not be empty")
    return out


def load_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a config file; raises :class:`ConfigError`."""
    text = Path(path).read_text(encoding="utf-8")
    config, diagnostics = parse_config(text, str(path))
    if diagnostics:
        raise ConfigError(diagnostics)
    return config


def dump_config(config: RunConfig) -> str:
    """INI text that :func:`parse_config` turns back into ``config``."""
    cp = configparser.ConfigParser(interpolation=None)
    for sec in _SECTIONS:
        cp.add_section(sec)
    for name, sec, key, kind in _LAYOUT:
        cp.set(sec, key, _render(kind, getattr(config, name)))
    for pos, (sp, tm) in enumerate(config.kernels or ()):
        cp.set("kernels", f"output{pos}", f"{sp!r}, {tm!r}")
    lines = []
    for sec in _SECTIONS:
        lines.append(f"[{sec}]")
        for key, value in cp[sec].items():
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)

