"""Command-line front end for alignment, tracking and sweep simulations.

Every output file starts with ``#``-prefixed header lines holding the fully
resolved configuration, so any file can be regenerated exactly.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from . import __version__
from .experiments import (
    POLES,
    AlignmentScenario,
    run_alignment,
    run_tracking,
    sample_uniform_basis,
    sweep_integration_time,
    sweep_rate_grid,
)
from .hardware import ActuatorSpec, RandomWalk, SawtoothGreatCircle
from .photon_pair import CoincidenceModel, TwoPhotonState

COMMANDS = ("align", "track", "sweep-t", "sweep-grid", "oracle-check")
TARGETS = tuple(POLES) + ("random",)
DRIFTS = ("static", "sawtooth", "walk")
FORMATS = ("csv", "jsonl")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ORACLE = 2
EXIT_IO = 3

TRACE_COLUMNS = (
    "eval_index",
    "sim_time_s",
    "v1",
    "v2",
    "v3",
    "c_hh",
    "c_hv",
    "singles_a",
    "singles_b",
    "theta_ab_deg",
)
SWEEP_STATS = ("mean_theta_error_deg", "stddev_theta_error_deg", "n_runs")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str = "align"
    rp: float = 800.0
    ra: float = 60.0
    T: float = 5.0
    gamma: float = 1.0
    seed: int = 0
    target: str = "random"
    drift: str = "static"
    drift_rate_deg_per_hour: Optional[float] = None
    evals: Optional[int] = None
    stages: int = 3
    out: Optional[str] = None
    workers: int = 1
    format: str = "csv"
    targets_per_point: int = 100
    t_grid: tuple = (0.5, 1.0, 2.0, 5.0, 10.0)
    rpt_grid: tuple = (500.0, 1500.0, 4000.0, 6080.0)
    rat_grid: tuple = (50.0, 150.0, 300.0, 456.0)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"command: unknown command {self.command!r}")
        for name in ("rp", "ra"):
            if not getattr(self, name) >= 0:
                raise UsageError(f"{name}: must be non-negative, got {getattr(self, name)}")
        if not self.T > 0:
            raise UsageError(f"T: must be positive, got {self.T}")
        if not 0.0 <= self.gamma <= 1.0:
            raise UsageError(f"gamma: must lie in [0, 1], got {self.gamma}")
        if self.seed < 0:
            raise UsageError(f"seed: must be non-negative, got {self.seed}")
        if self.target not in TARGETS:
            raise UsageError(f"target: expected one of {', '.join(TARGETS)}, got {self.target!r}")
        if self.drift not in DRIFTS:
            raise UsageError(f"drift: expected one of {', '.join(DRIFTS)}, got {self.drift!r}")
        if self.format not in FORMATS:
            raise UsageError(f"format: expected csv or jsonl, got {self.format!r}")
        if self.evals is not None and self.evals < 1:
            raise UsageError(f"evals: must be positive, got {self.evals}")
        if self.stages not in (3, 4):
            raise UsageError(f"stages: must be 3 or 4, got {self.stages}")
        if self.workers < 1:
            raise UsageError(f"workers: must be at least 1, got {self.workers}")
        if self.targets_per_point < 1:
            raise UsageError(f"targets_per_point: must be positive, got {self.targets_per_point}")
        if self.drift_rate_deg_per_hour is not None and self.drift_rate_deg_per_hour < 0:
            raise UsageError("drift_rate_deg_per_hour: must be non-negative")
        for name in ("t_grid", "rpt_grid", "rat_grid"):
            grid = getattr(self, name)
            if not grid or any(not x >= 0 for x in grid):
                raise UsageError(f"{name}: must be a non-empty list of non-negative numbers")
        if any(x <= 0 for x in self.t_grid):
            raise UsageError("t_grid: integration periods must be positive")

    @property
    def budget(self) -> int:
        if self.evals is not None:
            return self.evals
        # tracking runs default to four simulated hours
        return max(1, int(round(4 * 3600 / self.T))) if self.command == "track" else 200

    def header(self) -> dict:
        out = {"artifact_version": __version__}
        for f in fields(self):
            if f.name == "out":
                # where the file went does not affect its contents
                continue
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out


_LIST_KEYS = ("t_grid", "rpt_grid", "rat_grid")
_INT_KEYS = ("seed", "evals", "stages", "workers", "targets_per_point")
_FLOAT_KEYS = ("rp", "ra", "T", "gamma", "drift_rate_deg_per_hour")
_KNOWN = {f.name for f in fields(RunConfig)} - {"command", "out"}


def _convert(key: str, raw):
    if raw is None:
        return None
    try:
        if key in _LIST_KEYS:
            items = raw if isinstance(raw, (list, tuple)) else str(raw).replace(",", " ").split()
            return tuple(float(x) for x in items)
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
            return value
    except (TypeError, ValueError):
        raise UsageError(f"{key}: cannot parse value {raw!r}") from None
    return str(raw)


def _normalize_key(key: str) -> str:
    return key.strip().replace("-", "_")


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` file; names match the command-line flags."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=", ":"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc.strerror}") from None
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise UsageError(f"--config: malformed file {path}: {exc}") from None
    values = {}
    for key, raw in parser.items("run"):
        name = _normalize_key(key)
        if name not in _KNOWN:
            raise UsageError(f"--config: unknown key {key!r} in {path}")
        values[name] = _convert(name, raw)
    return values


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="polalign", description="Simulate non-local polarization alignment.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--rp", type=float, help="pair coincidence rate scale (1/s)")
    p.add_argument("--ra", type=float, help="accidental coincidence rate (1/s)")
    p.add_argument("--T", type=float, help="integration period (s)")
    p.add_argument("--gamma", type=float, help="indistinguishability weight in [0, 1]")
    p.add_argument("--seed", type=int)
    p.add_argument("--target", help="Bob's fixed basis: a pole name or 'random'")
    p.add_argument("--drift", help="static, sawtooth or walk (track only)")
    p.add_argument("--drift-rate-deg-per-hour", type=float)
    p.add_argument("--evals", type=int, help="objective evaluation budget per run")
    p.add_argument("--stages", type=int, help="number of actuator stages (3 or 4)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--workers", type=int)
    p.add_argument("--format", help="csv or jsonl")
    p.add_argument("--targets-per-point", type=int)
    p.add_argument("--t-grid", nargs="+", help="integration periods for sweep-t")
    p.add_argument("--rpt-grid", nargs="+", help="r_p*T values for sweep-grid")
    p.add_argument("--rat-grid", nargs="+", help="r_a*T values for sweep-grid")
    return p


def parse_config(argv, environ_defaults: Optional[dict] = None) -> RunConfig:
    """Resolve flags over config file over defaults."""
    args = build_parser().parse_args(argv)
    values = dict(environ_defaults or {})
    if args.config:
        values.update(read_config_file(args.config))
    for name in _KNOWN | {"out"}:
        raw = getattr(args, name, None)
        if raw is not None:
            values[name] = _convert(name, raw)
    values["command"] = args.command
    return RunConfig(**values)


# -- execution -----------------------------------------------------------------


def _target(cfg: RunConfig):
    if cfg.target == "random":
        return sample_uniform_basis(np.random.default_rng([cfg.seed, 99]))
    return POLES[cfg.target]


def _drift(cfg: RunConfig):
    rate = cfg.drift_rate_deg_per_hour
    if cfg.drift == "sawtooth":
        return SawtoothGreatCircle(rate_deg_per_hour=176.1 if rate is None else rate)
    if cfg.drift == "walk":
        horizon = cfg.budget * cfg.T / 3600.0
        return RandomWalk.from_mean_drift(0.1 if rate is None else rate, horizon, dt=cfg.T)
    return None


def scenario_for(cfg: RunConfig) -> AlignmentScenario:
    model = CoincidenceModel(r_p=cfg.rp, r_a=cfg.ra, T=cfg.T)
    common = dict(
        state=TwoPhotonState(gamma=cfg.gamma),
        model=model,
        alice_actuator=ActuatorSpec.uniform(cfg.stages),
        seed=cfg.seed,
        evaluations=cfg.budget,
    )
    drift = _drift(cfg) if cfg.command == "track" else None
    if drift is not None:
        return AlignmentScenario(bob_drift=drift, **common)
    return AlignmentScenario(bob_basis=_target(cfg), **common)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _trace_rows(trace, stages):
    names = list(TRACE_COLUMNS)
    names[2:5] = [f"v{i + 1}" for i in range(stages)]
    rows = []
    for k in range(len(trace)):
        rows.append(
            [
                int(trace.eval_index[k]),
                float(trace.sim_time[k]),
                *(float(v) for v in trace.voltages[k]),
                int(trace.c_hh[k]),
                int(trace.c_hv[k]),
                int(trace.singles_a[k]),
                int(trace.singles_b[k]),
                math.degrees(trace.theta_ab[k]),
            ]
        )
    return names, rows


def _render(cfg: RunConfig, names, rows, extra_header=None) -> str:
    header = cfg.header()
    if extra_header:
        header.update(extra_header)
    lines = [f"# {key} = {json.dumps(header[key])}" for key in header]
    if cfg.format == "csv":
        lines.append(",".join(names))
        lines.extend(",".join(_fmt(x) for x in row) for row in rows)
    else:
        for row in rows:
            record = {n: (int(x) if isinstance(x, (int, np.integer)) else float(x)) for n, x in zip(names, row)}
            lines.append(json.dumps(record))
    return "\n".join(lines) + "\n"


def _run(cfg: RunConfig):
    sc = scenario_for(cfg)
    if cfg.command in ("align", "track"):
        trace = run_alignment(sc) if cfg.command == "align" else run_tracking(sc)
        names, rows = _trace_rows(trace, cfg.stages)
        extra = {"final_theta_error_deg": math.degrees(trace.final_theta_error)}
        return names, rows, extra, EXIT_OK
    if cfg.command == "sweep-t":
        res = sweep_integration_time(sc, cfg.t_grid, cfg.targets_per_point, cfg.workers)
    elif cfg.command == "sweep-grid":
        base = replace(sc, model=replace(sc.model, T=cfg.T))
        res = sweep_rate_grid(base, cfg.rpt_grid, cfg.rat_grid, cfg.targets_per_point, cfg.workers)
    else:
        return _oracle_rows(cfg)
    names = list(res.coord_names) + list(SWEEP_STATS)
    rows = [[*(float(c) for c in row[:-1]), int(row[-1])] for row in res.rows()]
    return names, rows, None, EXIT_OK


def _oracle_rows(cfg: RunConfig):
    from .oracles import run_all

    results = run_all(cfg.seed)
    names = ["check", "max_abs_error", "tolerance", "passed"]
    rows = [[name, err, tol, int(ok)] for name, err, tol, ok in results]
    status = EXIT_OK if all(r[3] for r in rows) else EXIT_ORACLE
    return names, rows, None, status


def _fmt_any(x):
    return x if isinstance(x, str) else _fmt(x)


def execute(cfg: RunConfig, stdout=None) -> int:
    """Run ``cfg`` and write its output; returns the process exit status."""
    stdout = stdout or sys.stdout
    names, rows, extra, status = _run(cfg)
    if cfg.command == "oracle-check":
        header = cfg.header()
        lines = [f"# {key} = {json.dumps(header[key])}" for key in header]
        if cfg.format == "csv":
            lines.append(",".join(names))
            lines.extend(",".join(_fmt_any(x) for x in row) for row in rows)
        else:
            lines.extend(json.dumps(dict(zip(names, row))) for row in rows)
        text = "\n".join(lines) + "\n"
    else:
        text = _render(cfg, names, rows, extra)
    if cfg.out is None:
        stdout.write(text)
        return status
    try:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        try:
            os.remove(cfg.out)
        except OSError:
            pass
        print(f"polalign: cannot write {cfg.out}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    return status


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"polalign: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
