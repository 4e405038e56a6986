"""Command-line front end.

    sfroute run --lambda 0.02 --beta 0.07 --strategy adaptive --out results/
    sfroute betac --strategy sp,echenique,adaptive --lambda-grid 0.01:0.03:0.01 \\
        --beta-grid 0:0.2:0.02 --replicas 3 --workers 4

Settings come from a flat ``key=value`` file (``--config``) overridden by
flags.  Every output starts with ``#%`` header lines recording the full
resolved settings.  Passing an output file back as ``--config`` reproduces it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import (
    EPS_JAM,
    evaluate_points,
    find_beta_c,
    mf_beta_c,
    mf_beta_c_sp,
    mf_lambda_min,
    mf_lambda_min_sp,
)
from .dynamics import PROFILE_COLUMNS, SERIES_COLUMNS, SimConfig, _fmt, network_for, run
from .graph import write_edgelist
from .routing import Strategy

COMMANDS = ("gengraph", "run", "sweep", "betac", "profile", "mft")
HEADER_PREFIX = "#% "


class ConfigError(ValueError):
    pass


def _parse_grid(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid {text!r} must look like start:stop:step")
        a, b, step = (float(p) for p in parts)
        if step <= 0 or b < a:
            raise ConfigError(f"grid {text!r} needs step > 0 and stop >= start")
        count = int(math.floor((b - a) / step + 1e-9)) + 1
        return [round(a + i * step, 12) for i in range(count)]
    return [float(x) for x in text.split(",") if x.strip()]


def _parse_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


# key -> (converter, default)
_KEYS = {
    "n": (int, 1000),
    "m": (int, 3),
    "m0": (int, 3),
    "lambda": (float, 0.02),
    "beta": (float, 0.07),
    "strategy": (str, "adaptive"),
    "h": (float, 0.8),
    "horizon": (int, 3000),
    "transient": (int, 600),
    "seed": (int, 0),
    "t_window": (int, 10),
    "eps_jam": (float, EPS_JAM),
    "workers": (int, 1),
    "out": (str, "."),
    "format": (str, "csv"),
    "lambda_grid": (str, ""),
    "beta_grid": (str, ""),
    "replicas": (int, 3),
    "refine": (int, 0),
    "snapshot_steps": (str, "100,200,300"),
}
# settings that do not change file contents stay out of the header
_VOLATILE = {"workers", "out"}
# header-only keys: written for the reader, skipped on replay
_DERIVED = {"command", "version", "d", "k_max", "lambda_min", "lambda_min_sp"}


def _norm_key(key: str) -> str:
    key = key.strip().lstrip("-").replace("-", "_").lower()
    return "lambda" if key in ("lam", "lambda_") else key


@dataclass
class ExperimentSpec:
    command: str
    cfg: SimConfig
    strategies: list[Strategy]
    lambda_grid: list[float] = field(default_factory=list)
    beta_grid: list[float] = field(default_factory=list)
    output_dir: Path = Path(".")
    format: str = "csv"
    workers: int = 1
    replicas: int = 3
    refine: int = 0
    eps_jam: float = EPS_JAM
    snapshot_steps: list[int] = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    def header(self) -> dict:
        return {"command": self.command, "version": __version__} | {
            k: v for k, v in self.settings.items() if k not in _VOLATILE
        }


def read_config_text(text: str) -> dict[str, str]:
    """Parse ``key=value`` lines, or the ``#%`` header of an earlier output."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        doc = json.loads(text)
        return {k: str(v) for k, v in doc.get("header", doc).items()}
    out: dict[str, str] = {}
    replay = stripped.startswith(HEADER_PREFIX.strip())
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if replay:
            if not line.startswith(HEADER_PREFIX.strip()):
                break
            line = line[len(HEADER_PREFIX.strip()) :].strip()
        else:
            line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = line.split("=", 1)
        out[_norm_key(key)] = val.strip()
    return out


def parse_config(
    command: str,
    file_settings: dict[str, str] | None = None,
    overrides: dict[str, object] | None = None,
) -> ExperimentSpec:
    """Merge defaults, file settings and flag overrides (flags win) and validate."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    raw: dict[str, object] = {}
    for src in (file_settings or {}, overrides or {}):
        for key, val in src.items():
            if _norm_key(key) in _DERIVED:
                continue
            key = _norm_key(key)
            if key not in _KEYS:
                raise ConfigError(f"unknown setting {key!r}")
            if val is not None:
                raw[key] = val
    s: dict[str, object] = {}
    for key, (conv, default) in _KEYS.items():
        val = raw.get(key, default)
        try:
            s[key] = conv(val) if not isinstance(val, conv) else val
        except (TypeError, ValueError):
            raise ConfigError(f"bad value for {key}: {val!r}") from None

    try:
        strategies = _parse_strategies(str(s["strategy"]), float(s["h"]))
        cfg = SimConfig(
            n=s["n"], m=s["m"], m0=s["m0"], lam=s["lambda"], beta=s["beta"],
            strategy=strategies[0], horizon=s["horizon"], transient=s["transient"],
            seed=s["seed"], t_window=s["t_window"],
        )
        lam_grid = _parse_grid(str(s["lambda_grid"]))
        beta_grid = _parse_grid(str(s["beta_grid"]))
        snaps = _parse_ints(str(s["snapshot_steps"]))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None

    if s["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    if s["replicas"] < 1:
        raise ConfigError("replicas must be >= 1")
    if s["refine"] < 0:
        raise ConfigError("refine must be >= 0")
    if s["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {s['format']!r}")
    if command in ("sweep", "betac", "mft") and not lam_grid:
        raise ConfigError(f"{command} needs --lambda-grid")
    if command in ("sweep", "betac") and not beta_grid:
        raise ConfigError(f"{command} needs --beta-grid")
    if command in ("sweep", "betac") and cfg.horizon == 0:
        raise ConfigError(f"{command} needs horizon > 0")
    if any(b2 <= b1 for b1, b2 in zip(beta_grid, beta_grid[1:])):
        raise ConfigError("beta grid must be strictly ascending")
    if any(x < 0 for x in lam_grid + beta_grid):
        raise ConfigError("grid values must be >= 0")
    if command in ("run", "profile") and len(strategies) != 1:
        raise ConfigError(f"{command} takes exactly one strategy")

    return ExperimentSpec(
        command=command,
        cfg=cfg,
        strategies=strategies,
        lambda_grid=lam_grid,
        beta_grid=beta_grid,
        output_dir=Path(str(s["out"])),
        format=str(s["format"]),
        workers=int(s["workers"]),
        replicas=int(s["replicas"]),
        refine=int(s["refine"]),
        eps_jam=float(s["eps_jam"]),
        snapshot_steps=snaps,
        settings={k: s[k] for k in _KEYS},
    )


def _parse_strategies(text: str, h: float) -> list[Strategy]:
    names = [x.strip() for x in text.split(",") if x.strip()]
    if names == ["all"]:
        names = ["sp", "echenique", "adaptive"]
    if not names:
        raise ConfigError("no strategy given")
    return [Strategy.parse(name, h) for name in names]


# ------------------------------------------------------------ writers


def _write_table(spec: ExperimentSpec, name: str, columns: Sequence[str], rows: list[Sequence]) -> Path:
    spec.output_dir.mkdir(parents=True, exist_ok=True)
    header = spec.header()
    if spec.format == "json":
        path = spec.output_dir / f"{name}.json"
        doc = {
            "header": header,
            "columns": list(columns),
            "rows": [[_json_cell(x) for x in row] for row in rows],
        }
        path.write_text(json.dumps(doc, indent=1) + "\n")
        return path
    path = spec.output_dir / f"{name}.csv"
    buf = io.StringIO()
    for k, v in header.items():
        buf.write(f"{HEADER_PREFIX}{k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(x) for x in row])
    path.write_text(buf.getvalue())
    return path


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, float, np.integer, np.floating)):
        return _fmt(x)
    return str(x)


def _json_cell(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return None if math.isnan(x) else float(x)
    return x


# ------------------------------------------------------------ commands


def cmd_gengraph(spec: ExperimentSpec) -> list[Path]:
    net = network_for(spec.cfg)
    spec.output_dir.mkdir(parents=True, exist_ok=True)
    if spec.format == "json":
        return [_write_table(spec, "graph", ("u", "v"), net.edges.tolist())]
    path = spec.output_dir / "graph.txt"
    write_edgelist(net, path)
    return [path]


def cmd_run(spec: ExperimentSpec) -> list[Path]:
    series = run(spec.cfg)
    return [_write_table(spec, "run", SERIES_COLUMNS, list(series.rows()))]


def cmd_profile(spec: ExperimentSpec) -> list[Path]:
    series = run(spec.cfg, snapshot_steps=spec.snapshot_steps)
    rows = [r for s in sorted(series.profiles) for r in series.profiles[s].rows()]
    return [_write_table(spec, "profile", PROFILE_COLUMNS, rows)]


def cmd_sweep(spec: ExperimentSpec) -> list[Path]:
    rows = []
    for strat in spec.strategies:
        tmpl = spec.cfg.replace(strategy=strat)
        pts = evaluate_points(
            tmpl,
            [(lam, b) for lam in spec.lambda_grid for b in spec.beta_grid],
            spec.replicas,
            eps_jam=spec.eps_jam,
            workers=spec.workers,
        )
        rows += [(p.lam, p.beta, strat.name, p.eta.eta, p.eta_std, p.replicas, p.jammed) for p in pts]
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    cols = ("lambda", "beta", "strategy", "eta", "eta_std", "replicas", "jammed")
    return [_write_table(spec, "sweep", cols, rows)]


def cmd_betac(spec: ExperimentSpec) -> list[Path]:
    rows = []
    sim_adaptive: dict[float, float] = {}
    for strat in spec.strategies:
        for lam in spec.lambda_grid:
            res = find_beta_c(
                lam, strat, spec.cfg, spec.beta_grid, spec.replicas,
                eps_jam=spec.eps_jam, refine=spec.refine, workers=spec.workers,
            )
            rows.append((lam, strat.name, res.beta_c, res.err, spec.eps_jam, spec.replicas))
            if strat.kind == Strategy.adaptive().kind:
                sim_adaptive[lam] = res.beta_c
    rows.sort(key=lambda r: (r[0], r[1]))
    cols = ("lambda", "strategy", "beta_c", "beta_c_err", "eta_threshold", "replicas")
    paths = [_write_table(spec, "betac", cols, rows)]
    if sim_adaptive:
        paths.append(_write_mf(spec, "mft_compare", sim_adaptive))
    return paths


def _write_mf(spec: ExperimentSpec, name: str, sim: dict[float, float]) -> Path:
    net = network_for(spec.cfg)
    D, kmax = net.diameter_avg, net.k_max
    rows = [
        (lam, sim.get(lam, math.nan), mf_beta_c(lam, D, kmax), mf_beta_c_sp(lam, D, kmax, 2.0))
        for lam in sorted(spec.lambda_grid)
    ]
    spec.settings = spec.settings | {
        "D": repr(D),
        "k_max": kmax,
        "lambda_min": repr(mf_lambda_min(D, kmax)),
        "lambda_min_sp": repr(mf_lambda_min_sp(D, kmax)),
    }
    try:
        return _write_table(spec, name, ("lambda", "beta_c_sim", "beta_c_mf", "beta_c_mf_sp"), rows)
    finally:
        for k in ("D", "k_max", "lambda_min", "lambda_min_sp"):
            spec.settings.pop(k, None)


def cmd_mft(spec: ExperimentSpec) -> list[Path]:
    return [_write_mf(spec, "mft", {})]


_DISPATCH = {
    "gengraph": cmd_gengraph,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "betac": cmd_betac,
    "profile": cmd_profile,
    "mft": cmd_mft,
}


def execute(spec: ExperimentSpec) -> list[Path]:
    return _DISPATCH[spec.command](spec)


# ------------------------------------------------------------ argv


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sfroute", description="Packet routing on BA scale-free networks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="config file; an earlier output replays its run")
        p.add_argument("--lambda", dest="lambda", type=float, help="generation rate per unit degree")
        p.add_argument("--beta", type=float, help="delivery capacity per unit degree")
        p.add_argument("--strategy", help="strategy name or comma list (all selects every one)")
        p.add_argument("--h", type=float, help="distance weight of the echenique rule")
        p.add_argument("--n", type=int, help="number of nodes")
        p.add_argument("--m", type=int, help="edges added per new node")
        p.add_argument("--m0", type=int, help="size of the seed clique")
        p.add_argument("--horizon", type=int, help="steps to simulate")
        p.add_argument("--transient", type=int, help="steps discarded before fitting")
        p.add_argument("--seed", type=int, help="master seed; replica r uses seed+r")
        p.add_argument("--t-window", dest="t_window", type=int, help="steps averaged for delivery time")
        p.add_argument("--eps-jam", dest="eps_jam", type=float, help="eta above this counts as jammed")
        p.add_argument("--workers", type=int, help="worker processes")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--lambda-grid", dest="lambda_grid", help="a:b:step or comma list")
        p.add_argument("--beta-grid", dest="beta_grid", help="a:b:step or comma list, increasing")
        p.add_argument("--replicas", type=int, help="seeds per grid point")
        p.add_argument("--refine", type=int, help="bisection rounds inside the bracket")
        p.add_argument("--snapshot-steps", dest="snapshot_steps", help="steps at which to record n_k")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = vars(build_parser().parse_args(argv))
        command = args.pop("command")
        cfg_path = args.pop("config")
        file_settings = read_config_text(cfg_path.read_text()) if cfg_path else {}
        spec = parse_config(command, file_settings, args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"sfroute: error: {exc}", file=sys.stderr)
        return 1
    try:
        for path in execute(spec):
            print(path)
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit 2
        print(f"sfroute: runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
