"""Experiment configuration files.

Flat ``key = value`` lines; ``#`` starts a comment. Scenario keys (``n``,
``q``, ``q0``, ``gamma``) accept a single value or a comma list; every
combination is evaluated. Grids use ``start:stop`` (step 1) or
``start:stop:step`` with an inclusive stop, or a comma list.

Example::

    preset = paper-baseline
    gamma = 0.5
    n = 2
    q = 0.2
    sweep = q0
    q0_grid = 0.3:1.0:0.05
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Optional

from .channel import BASELINE
from .errors import ConfigError

MODES = ("analyze", "simulate", "sweep", "preset")
AXES = ("q0", "q", "n", "gamma")
BASELINE_PRESET = "paper-baseline"
GAMMAS = (0.5, 0.8, 1.2, 2.5)

FIGURE_PRESETS: dict[str, dict] = {
    "fig-aggregate-vs-n": {
        "sweep": "n", "grid": "1:30", "gamma": GAMMAS, "q": (0.05, 0.1, 0.2), "q0": (1.0,)
    },
    "fig-throughput-vs-q": {
        "sweep": "q", "grid": "0.01:0.99:0.01", "gamma": GAMMAS, "n": (2, 5, 10), "q0": (1.0,)
    },
    "fig-q0min-vs-n": {
        "sweep": "n", "grid": "1:30", "gamma": GAMMAS, "q": (0.05, 0.1, 0.2), "q0": (1.0,)
    },
    "fig-queue-vs-q0": {
        "sweep": "q0", "grid": "0.01:1:0.01", "gamma": GAMMAS, "n": (2,), "q": (0.1, 0.2)
    },
}

# geometry key -> (BASELINE entry, multiplier from config units to SI)
GEOMETRY_KEYS = {
    "alpha": ("alpha", 1.0),
    "eta": ("eta", 1.0),
    "ptx_user_mw": ("ptx_user", 1e-3),
    "ptx_relay_mw": ("ptx_relay", 1e-3),
    "r_user_dest": ("r_user_dest", 1.0),
    "r_user_relay": ("r_user_relay", 1.0),
    "r_relay_dest": ("r_relay_dest", 1.0),
    "v": ("v", 1.0),
}
SIM_KEYS = ("slots", "warmup", "seed", "replications")
KNOWN_KEYS = (
    {"preset", "mode", "sweep", "strict_paper_formulas"}
    | set(AXES)
    | {f"{a}_grid" for a in AXES}
    | set(GEOMETRY_KEYS)
    | set(SIM_KEYS)
)


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    values: dict[str, tuple]
    geometry: dict[str, float] = field(default_factory=lambda: dict(BASELINE))
    preset: Optional[str] = None
    sweep: Optional[str] = None
    grid: tuple = ()
    strict_paper_formulas: bool = False
    slots: int = 1_000_000
    warmup: Optional[int] = None
    seed: int = 0
    replications: int = 10
    output: Optional[Path] = None
    format: str = "csv"
    defaulted: tuple[str, ...] = ()

    @property
    def simulate(self) -> bool:
        return self.mode == "simulate"

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        cfg = replace(self, **kwargs)
        _check_sim(cfg, None)
        return cfg


def _number(text: str, key: str, line: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}", key, line) from None


def _integer(text: str, key: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}", key, line) from None


def _boolean(text: str, key: str, line: int) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}", key, line)


def parse_grid(text: str, integer: bool, key: str = "grid", line: int | None = None) -> tuple:
    """Expand ``start:stop[:step]`` (inclusive) or a comma list."""
    conv = _integer if integer else _number
    if ":" in text:
        parts = [p.strip() for p in text.split(":")]
        if len(parts) not in (2, 3):
            raise ConfigError(f"grid must be start:stop or start:stop:step, got {text!r}", key, line)
        try:
            start, stop = Decimal(parts[0]), Decimal(parts[1])
            step = Decimal(parts[2]) if len(parts) == 3 else Decimal(1)
        except InvalidOperation:
            raise ConfigError(f"bad grid bounds in {text!r}", key, line) from None
        if step <= 0:
            raise ConfigError("grid step must be positive", key, line)
        values = []
        x = start
        while x <= stop:
            values.append(conv(str(x), key, line))
            x += step
    else:
        values = [conv(p.strip(), key, line) for p in text.split(",") if p.strip()]
    if not values:
        raise ConfigError("empty grid", key, line)
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError("grid must be strictly increasing", key, line)
    return tuple(values)


def _check_axis_values(key: str, values: tuple, line: int | None) -> None:
    for v in values:
        if key == "n" and v < 1:
            raise ConfigError(f"n must be >= 1, got {v}", key, line)
        if key in ("q", "q0") and not 0.0 <= v <= 1.0:
            raise ConfigError(f"{key} must lie in [0, 1], got {v}", key, line)
        if key == "gamma" and v < 0:
            raise ConfigError(f"gamma must be >= 0, got {v}", key, line)


def _check_sim(cfg: ExperimentConfig, lines: dict | None) -> None:
    ln = (lambda k: lines.get(k)) if lines else (lambda k: None)
    if cfg.slots < 1:
        raise ConfigError("slots must be >= 1", "slots", ln("slots"))
    if cfg.replications < 1:
        raise ConfigError("replications must be >= 1", "replications", ln("replications"))
    if cfg.warmup is not None and not 0 <= cfg.warmup < cfg.slots:
        raise ConfigError("warmup must satisfy 0 <= warmup < slots", "warmup", ln("warmup"))
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer", "seed", ln("seed"))


def read_pairs(text: str) -> list[tuple[str, str, int]]:
    pairs = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", None, lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        value = value.strip("\"'")
        if key not in KNOWN_KEYS:
            raise ConfigError("unknown key", key, lineno)
        if key in seen:
            raise ConfigError(f"duplicate key (first set on line {seen[key]})", key, lineno)
        if not value:
            raise ConfigError("missing value", key, lineno)
        seen[key] = lineno
        pairs.append((key, value, lineno))
    return pairs


def parse_config_text(text: str) -> ExperimentConfig:
    pairs = read_pairs(text)
    raw = {k: v for k, v, _ in pairs}
    lines = {k: ln for k, _, ln in pairs}

    preset = raw.get("preset")
    figure = None
    if preset is not None:
        if preset in FIGURE_PRESETS:
            figure = FIGURE_PRESETS[preset]
        elif preset != BASELINE_PRESET:
            choices = ", ".join([BASELINE_PRESET, *FIGURE_PRESETS])
            raise ConfigError(f"unknown preset {preset!r} (choose from {choices})", "preset", lines["preset"])

    sweep = raw.get("sweep")
    if sweep is not None and sweep not in AXES:
        raise ConfigError(f"sweep axis must be one of {', '.join(AXES)}", "sweep", lines["sweep"])
    if figure is not None:
        if sweep is not None and sweep != figure["sweep"]:
            raise ConfigError(
                f"preset {preset} sweeps {figure['sweep']}", "sweep", lines["sweep"]
            )
        sweep = figure["sweep"]

    if "mode" in raw:
        mode = raw["mode"]
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}", "mode", lines["mode"])
        if mode == "preset" and figure is None:
            raise ConfigError("mode 'preset' needs a figure preset", "mode", lines["mode"])
        if mode == "sweep" and sweep is None:
            raise ConfigError("mode 'sweep' needs a 'sweep' axis", "mode", lines["mode"])
        if mode == "analyze" and sweep is not None:
            raise ConfigError("mode 'analyze' cannot have a sweep axis", "mode", lines["mode"])
    else:
        mode = "preset" if figure else "sweep" if sweep else "analyze"

    values: dict[str, tuple] = {}
    defaulted = []
    for axis in AXES:
        if axis not in raw:
            continue
        if axis == sweep:
            raise ConfigError(
                f"'{axis}' is the sweep axis; give its values in '{axis}_grid'", axis, lines[axis]
            )
        if any(c in raw[axis] for c in ",:"):
            vals = parse_grid(raw[axis], axis == "n", axis, lines[axis])
        else:
            vals = ((_integer if axis == "n" else _number)(raw[axis], axis, lines[axis]),)
        _check_axis_values(axis, vals, lines[axis])
        values[axis] = vals
    for axis in AXES:
        if axis in values:
            continue
        if axis == sweep:
            grid_key = f"{axis}_grid"
            if grid_key in raw:
                vals = parse_grid(raw[grid_key], axis == "n", grid_key, lines[grid_key])
            elif figure is not None:
                vals = parse_grid(figure["grid"], axis == "n")
            else:
                raise ConfigError(f"sweep over {axis} needs '{grid_key}'", grid_key)
            _check_axis_values(axis, vals, lines.get(grid_key))
            values[axis] = vals
        elif figure is not None and axis in figure:
            values[axis] = tuple(figure[axis])
            defaulted.append(axis)
        else:
            raise ConfigError("missing required key", axis)

    for axis in AXES:
        grid_key = f"{axis}_grid"
        if grid_key in raw and axis != sweep:
            raise ConfigError(f"'{grid_key}' given but the sweep axis is {sweep}", grid_key, lines[grid_key])

    geometry = dict(BASELINE)
    for key, (name, scale) in GEOMETRY_KEYS.items():
        if key in raw:
            value = _number(raw[key], key, lines[key]) * scale
            if key != "alpha" and not value > 0:
                raise ConfigError(f"{key} must be positive", key, lines[key])
            geometry[name] = value

    cfg = ExperimentConfig(
        mode=mode,
        values=values,
        geometry=geometry,
        preset=preset,
        sweep=sweep,
        grid=values[sweep] if sweep else (),
        strict_paper_formulas=_boolean(raw["strict_paper_formulas"], "strict_paper_formulas",
                                       lines["strict_paper_formulas"])
        if "strict_paper_formulas" in raw else False,
        slots=_integer(raw["slots"], "slots", lines["slots"]) if "slots" in raw else 1_000_000,
        warmup=_integer(raw["warmup"], "warmup", lines["warmup"]) if "warmup" in raw else None,
        seed=_integer(raw["seed"], "seed", lines["seed"]) if "seed" in raw else 0,
        replications=_integer(raw["replications"], "replications", lines["replications"])
        if "replications" in raw else 10,
        defaulted=tuple(defaulted),
    )
    _check_sim(cfg, lines)
    return cfg


def parse_config(path: str | Path) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text())
