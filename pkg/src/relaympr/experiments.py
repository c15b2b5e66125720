"""Grid evaluation, CSV output and text summaries for experiment configs."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, TextIO

from .channel import star_geometry, symmetric_link_params
from .config import ExperimentConfig
from .results import DIVERGED, Divergence
from .simulator import SimConfig, run as run_simulation
from .symmetric import (
    SymmetricScenario,
    characterize_queue_n,
    no_relay_throughput_n,
    throughput_n,
    throughput_vs_q,
)

SCHEMA = json.loads(resources.files("relaympr").joinpath("result_schema.json").read_text())
DIVERGENCE_TOKEN = SCHEMA["dialect"]["divergence_token"]
COLUMNS = [c["name"] for c in SCHEMA["columns"]]
SIM_COLUMNS = [c["name"] for c in SCHEMA["simulation_columns"]]
_TYPES = {c["name"]: c["type"] for c in SCHEMA["columns"] + SCHEMA["simulation_columns"]}
SERIES_ORDER = ("gamma", "n", "q", "q0")

Point = dict  # one value per axis in SERIES_ORDER


def columns_for(simulate: bool) -> list[str]:
    return COLUMNS + SIM_COLUMNS if simulate else list(COLUMNS)


def grid_points(cfg: ExperimentConfig) -> list[Point]:
    """Cartesian product of the scenario values; the sweep axis varies fastest."""
    order = [a for a in SERIES_ORDER if a != cfg.sweep] + ([cfg.sweep] if cfg.sweep else [])
    combos = itertools.product(*(cfg.values[a] for a in order))
    return [dict(zip(order, combo)) for combo in combos]


def geometry_for(cfg: ExperimentConfig, n: int, gamma: float):
    g = cfg.geometry
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return star_geometry(
            n,
            gamma=gamma,
            r_user_dest=g["r_user_dest"],
            r_user_relay=g["r_user_relay"],
            r_relay_dest=g["r_relay_dest"],
            ptx_user=g["ptx_user"],
            ptx_relay=g["ptx_relay"],
            eta=g["eta"],
            alpha=g["alpha"],
            v=g["v"],
        )


def analyze_point(cfg: ExperimentConfig, point: Point) -> dict:
    n, q, q0, gamma = point["n"], point["q"], point["q0"], point["gamma"]
    geometry = geometry_for(cfg, n, gamma)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = symmetric_link_params(geometry, relay_threshold_factor=cfg.strict_paper_formulas)
    scenario = SymmetricScenario(params, n, q, q0)
    queue = characterize_queue_n(scenario)
    row = {
        "n": n, "q": q, "q0": q0, "gamma": gamma,
        "lambda0": queue.lambda0,
        "lambda1": queue.lambda1,
        "lambda": queue.lam,
        "mu": queue.mu,
        "prob_empty": queue.prob_empty,
        "mean_queue": queue.mean_queue,
        "q0min": queue.q0min,
        "stable": queue.stable,
    }
    base = n * no_relay_throughput_n(params, n, q)
    if queue.stable:
        report = throughput_n(scenario)
        row.update(
            per_user_throughput=report.per_user[0],
            aggregate_throughput=report.aggregate,
            relay_gain=report.relay_gain,
        )
    else:
        row.update(per_user_throughput=DIVERGED, aggregate_throughput=DIVERGED, relay_gain=DIVERGED)
    row["no_relay_aggregate"] = base
    return row


def simulate_point(cfg: ExperimentConfig, point: Point, workers: int = 1) -> dict:
    n = point["n"]
    sim = SimConfig(
        geometry=geometry_for(cfg, n, point["gamma"]),
        q=(point["q"],) * n,
        q0=point["q0"],
        slots=cfg.slots,
        warmup=cfg.warmup,
        seed=cfg.seed,
        replications=cfg.replications,
    )
    stats = run_simulation(sim, workers=workers)
    out = {}
    for col, est in (
        ("sim_lambda", stats.lam),
        ("sim_mu", stats.mu),
        ("sim_prob_empty", stats.prob_empty),
        ("sim_mean_queue", stats.mean_queue),
        ("sim_per_user_throughput", stats.per_user),
        ("sim_aggregate_throughput", stats.aggregate),
    ):
        out[col] = est.mean
        out[f"{col}_se"] = est.se
    return out


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[dict]

    @property
    def columns(self) -> list[str]:
        return columns_for(self.config.simulate)

    @property
    def any_stable(self) -> bool:
        return any(r["stable"] for r in self.rows)

    def metadata(self) -> dict:
        cfg = self.config
        return {
            "mode": cfg.mode,
            "preset": cfg.preset,
            "sweep": cfg.sweep,
            "values": {k: list(v) for k, v in cfg.values.items()},
            "preset_defaults_used": list(cfg.defaulted),
            "geometry": cfg.geometry,
            "strict_paper_formulas": cfg.strict_paper_formulas,
            "simulation": {
                "slots": cfg.slots, "warmup": cfg.warmup, "seed": cfg.seed,
                "replications": cfg.replications,
            } if cfg.simulate else None,
            "columns": self.columns,
        }


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Evaluate every grid point; rows come back in grid order whatever ``workers`` is.

    With several workers, analytical points are spread over processes and
    simulation parallelizes across replications of one point at a time.
    """
    points = grid_points(cfg)
    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(analyze_point, [cfg] * len(points), points, chunksize=16))
    else:
        rows = [analyze_point(cfg, point) for point in points]
    if cfg.simulate:
        for row, point in zip(rows, points):
            row.update(simulate_point(cfg, point, workers))
    return ExperimentResult(cfg, rows)


def _format(value) -> str:
    if isinstance(value, Divergence):
        return DIVERGENCE_TOKEN
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(name: str, text: str):
    kind = _TYPES[name]
    if text == DIVERGENCE_TOKEN:
        if not kind.endswith("?"):
            raise ValueError(f"column {name} cannot hold the divergence token")
        return DIVERGED
    kind = kind.rstrip("?")
    if kind == "int":
        return int(text)
    if kind == "bool":
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r} in column {name}")
        return text == "true"
    return float(text)


def write_csv(rows: Iterable[dict], columns: list[str], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format(row[c]) for c in columns])


def read_csv(source: str | Path | TextIO) -> list[dict]:
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return read_csv(fh)
    reader = csv.reader(source)
    header = next(reader)
    unknown = [c for c in header if c not in _TYPES]
    if unknown:
        raise ValueError(f"unknown columns {unknown}")
    return [{c: _parse(c, v) for c, v in zip(header, line)} for line in reader]


def _fmt(x, digits: int = 6) -> str:
    if isinstance(x, Divergence):
        return DIVERGENCE_TOKEN
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return f"{x:.{digits}g}"
    return str(x)


def _series(result: ExperimentResult) -> dict[tuple, list[dict]]:
    cfg = result.config
    keys = [a for a in SERIES_ORDER if a != cfg.sweep]
    groups: dict[tuple, list[dict]] = {}
    for row in result.rows:
        groups.setdefault(tuple((k, row[k]) for k in keys), []).append(row)
    return groups


def _argmax(rows: list[dict], column: str) -> Optional[dict]:
    best = None
    for row in rows:
        v = row[column]
        if row["stable"] and not isinstance(v, Divergence) and (best is None or v > best[column]):
            best = row
    return best


def summarize(result: ExperimentResult) -> str:
    cfg = result.config
    buf = io.StringIO()
    title = cfg.preset if cfg.preset else cfg.mode
    buf.write(f"# {title}: {len(result.rows)} point(s)\n")
    if cfg.defaulted:
        buf.write(f"# preset defaults used for: {', '.join(cfg.defaulted)}\n")

    if cfg.sweep is None:
        for row in result.rows:
            buf.write(", ".join(f"{c}={_fmt(row[c])}" for c in result.columns) + "\n")
        return buf.getvalue()

    axis = cfg.sweep
    for key, rows in _series(result).items():
        label = ", ".join(f"{k}={_fmt(v)}" for k, v in key)
        stable = [r for r in rows if r["stable"]]
        buf.write(f"[{label}] ")
        if not stable:
            buf.write(f"unstable at every {axis} in the grid\n")
            continue
        parts = [f"stable at {len(stable)}/{len(rows)} {axis} values"]
        if axis == "n":
            best = _argmax(rows, "aggregate_throughput")
            parts.append(f"N*={best['n']} (aggregate {_fmt(best['aggregate_throughput'])})")
            unstable_n = [r["n"] for r in rows if not r["stable"]]
            if unstable_n:
                parts.append(f"unstable for n in {unstable_n}")
            q0mins = [r["q0min"] for r in rows]
            parts.append(f"q0min range [{_fmt(min(q0mins))}, {_fmt(max(q0mins))}]")
        elif axis == "q":
            best = _argmax(rows, "per_user_throughput")
            parts.append(f"q*={_fmt(best['q'])} on grid (per-user {_fmt(best['per_user_throughput'])})")
            kv = dict(key)
            if 0 < min(cfg.grid) and max(cfg.grid) < 1:
                params = symmetric_link_params(
                    geometry_for(cfg, kv["n"], kv["gamma"]), relay_threshold_factor=cfg.strict_paper_formulas
                )
                curve = throughput_vs_q(params, kv["n"], cfg.grid)
                parts.append(f"refined q*={curve.q_star:.6f}")
        elif axis == "q0":
            first = min(stable, key=lambda r: r["q0"])
            parts.append(f"q0min={_fmt(rows[0]['q0min'])}, first stable grid q0={_fmt(first['q0'])}")
        else:
            best = _argmax(rows, "aggregate_throughput")
            parts.append(f"best {axis}={_fmt(best[axis])} (aggregate {_fmt(best['aggregate_throughput'])})")
        gains = [r["relay_gain"] for r in stable if not math.isnan(r["relay_gain"])]
        if gains:
            parts.append(f"relay gain {_fmt(min(gains), 4)}..{_fmt(max(gains), 4)}")
        buf.write("; ".join(parts) + "\n")
    return buf.getvalue()


def write_outputs(result: ExperimentResult, output: Optional[Path], stream: TextIO) -> None:
    if output is None:
        write_csv(result.rows, result.columns, stream)
        return
    output = Path(output)
    with open(output, "w", newline="") as fh:
        write_csv(result.rows, result.columns, fh)
    meta = output.with_name(output.name + ".meta.json")
    meta.write_text(json.dumps(result.metadata(), indent=2) + "\n")
