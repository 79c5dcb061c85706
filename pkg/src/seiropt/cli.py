"""Command-line front end.

Selects a scenario (preset name or YAML file), runs one of the four
solution modes, and writes the results: trajectory/control CSV, a metadata
record, optionally per-step optimality reports and the value-function
binary dump. Exit codes: 0 success, 1 solver failure, 2 configuration
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import checks as checks_mod
from . import hjb as hjb_mod
from . import models, pipeline
from ._kernels import WORKERS_ENV
from .dal import DalConfig
from .hjb import GridSpec
from .models import (BetaSchedule, CostParams, EpidemicParams, PRESET_NAMES,
                     Scenario, Variant)
from .ode import ControlSchedule, IntegrationBlowupError, TimeGrid, Trajectory

__all__ = [
    "RunConfig",
    "ConfigError",
    "parse_scenario_file",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "run",
    "main",
]

CSV_HEADER = "t,s,e,i,r,u1,u2"
METHODS = ("uncontrolled", "sl", "dal", "sl-dal")


class ConfigError(Exception):
    """Bad configuration or scenario file; maps to exit code 2."""


@dataclass
class RunConfig:
    scenario: str
    method: str = "sl-dal"
    grid: int = 60
    control_mesh: tuple = (30, 30)
    dt: float = 0.05
    dal: DalConfig = field(default_factory=DalConfig)
    init_control: str | None = None
    out_dir: str = "."
    fmt: str = "csv"
    check_optimality: bool = False
    summary: bool = False
    dump_value: str | None = None
    backend: str | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.fmt not in ("csv", "json"):
            raise ConfigError(f"unknown output format {self.fmt!r}")
        if self.init_control is not None and self.method != "dal":
            raise ConfigError("--init-control only applies to --method dal")
        if self.dump_value is not None and self.method not in ("sl", "sl-dal") \
                and not self.summary:
            raise ConfigError("--dump-value requires a method that runs the "
                              "grid solver (sl or sl-dal)")
        if self.dt <= 0:
            raise ConfigError("dt must be > 0")


# ---------------------------------------------------------------------------
# scenario files

_VARIANT_BY_NAME = {v.value: v for v in Variant if v is not Variant.LQ1D}


def _check_keys(mapping: dict, allowed, where: str):
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")


def _build(cls, mapping: dict, where: str):
    try:
        return cls(**mapping)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_scenario_file(path) -> Scenario:
    """Load and validate a YAML scenario description.

    Top-level keys: variant (required), name, t0, T, x0, params, costs.
    params.beta holds the transmission schedule as {default, segments:
    [[lo, hi, value], ...]}. Omitted fields take the model defaults; every
    value is checked against the model invariants.
    """
    try:
        with open(path) as f:
            doc = yaml.safe_load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"scenario parse error in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: scenario file must be a mapping")

    _check_keys(doc, {"variant", "name", "t0", "T", "x0", "params", "costs"},
                str(path))
    try:
        variant = _VARIANT_BY_NAME[doc["variant"]]
    except KeyError:
        known = ", ".join(sorted(_VARIANT_BY_NAME))
        raise ConfigError(
            f"{path}: unknown or missing variant "
            f"{doc.get('variant')!r} (choose from {known})") from None

    pmap = dict(doc.get("params") or {})
    _check_keys(pmap, {"epsilon", "gamma", "mu", "p", "delta", "delta_fracs",
                       "beta"}, "params")
    beta = pmap.pop("beta", None)
    if beta is not None:
        if not isinstance(beta, dict):
            raise ConfigError("params.beta must be a mapping with "
                              "'default' and 'segments'")
        _check_keys(beta, {"default", "segments"}, "params.beta")
        segments = tuple(tuple(seg) for seg in beta.get("segments", ()))
        pmap["beta_schedule"] = _build(
            BetaSchedule,
            {"segments": segments, "default": beta.get("default", 16.0)},
            "params.beta")
    if "delta_fracs" in pmap:
        pmap["delta_fracs"] = tuple(pmap["delta_fracs"])
    params = _build(EpidemicParams, pmap, "params")

    cmap = dict(doc.get("costs") or {})
    _check_keys(cmap, {f.name for f in CostParams.__dataclass_fields__.values()},
                "costs")
    costs = _build(CostParams, cmap, "costs")

    smap = {"variant": variant, "params": params, "costs": costs}
    if "x0" in doc:
        smap["x0"] = tuple(doc["x0"])
    for key in ("t0", "T", "name"):
        if key in doc:
            smap[key] = doc[key]
    return _build(Scenario, smap, str(path))


def load_scenario(source: str) -> Scenario:
    """Preset name or path to a scenario file."""
    if source in PRESET_NAMES:
        return models.preset(source)
    if os.path.exists(source):
        return parse_scenario_file(source)
    raise ConfigError(f"{source!r} is neither a preset "
                      f"({', '.join(PRESET_NAMES)}) nor a scenario file")


# ---------------------------------------------------------------------------
# trajectory CSV

def _g17(x: float) -> str:
    return format(float(x), ".17g")


def recovered_series(scn: Scenario, traj: Trajectory,
                     controls: ControlSchedule) -> np.ndarray:
    """r per node: 1-s-e-i for the conservative variants; for border flow r
    has its own inflow and is integrated with the same Euler scheme."""
    states = traj.states
    if not scn.variant.is_border:
        return 1.0 - states[:, 0] - states[:, 1] - states[:, 2]
    grid = traj.grid
    d4 = scn.params.deltas[3]
    gam = scn.params.gamma
    r = np.empty(grid.n_max + 1)
    r[0] = 1.0 - states[0, 0] - states[0, 1] - states[0, 2]
    for n in range(grid.n_max):
        r[n + 1] = r[n] + grid.dt * (gam * states[n, 2] + controls.u2[n] * d4)
    return r


def write_trajectory_csv(path, scn: Scenario, traj: Trajectory,
                         controls: ControlSchedule) -> None:
    """Write `t,s,e,i,r,u1,u2` rows at 17 significant digits. A leading
    comment line carries the exact grid (t0, T, n_max) so a round trip
    rebuilds the identical TimeGrid (the printed node times alone cannot,
    because t_n = t0 + n*dt accumulates rounding)."""
    grid = traj.grid
    r = recovered_series(scn, traj, controls)
    with open(path, "w") as f:
        f.write(f"# t0={_g17(grid.t0)} T={_g17(grid.T)} n_max={grid.n_max}\n")
        f.write(CSV_HEADER + "\n")
        for n in range(grid.n_max + 1):
            s, e, i = traj.states[n]
            f.write(",".join((_g17(grid.t(n)), _g17(s), _g17(e), _g17(i),
                              _g17(r[n]), _g17(controls.u1[n]),
                              _g17(controls.u2[n]))) + "\n")


def read_trajectory_csv(path):
    """Read a trajectory CSV back into (TimeGrid, Trajectory,
    ControlSchedule); the r column is ignored (derived data)."""
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    meta = None
    if lines and lines[0].startswith("#"):
        fields = dict(tok.split("=", 1) for tok in lines[0][1:].split())
        meta = (float(fields["t0"]), float(fields["T"]), int(fields["n_max"]))
        lines = lines[1:]
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigError(f"{path}: expected header {CSV_HEADER!r}")
    rows = [ln.split(",") for ln in lines[1:]]
    if any(len(row) != 7 for row in rows):
        raise ConfigError(f"{path}: every row needs 7 columns")
    data = np.array([[float(v) for v in row] for row in rows])
    n_max = data.shape[0] - 1
    if n_max < 1:
        raise ConfigError(f"{path}: need at least two rows")
    if meta is None:
        meta = (data[0, 0], data[-1, 0], n_max)
    elif meta[2] != n_max:
        raise ConfigError(f"{path}: header n_max={meta[2]} but {n_max + 1} rows")
    grid = TimeGrid(t0=meta[0], T=meta[1], n_max=n_max)
    traj = Trajectory(grid, np.ascontiguousarray(data[:, 1:4]))
    controls = ControlSchedule(grid, np.ascontiguousarray(data[:, 5]),
                               np.ascontiguousarray(data[:, 6]))
    return grid, traj, controls


# ---------------------------------------------------------------------------
# outputs

def _write_metadata(path, record: dict, fmt: str) -> None:
    if fmt == "json":
        with open(path, "w") as f:
            json.dump(record, f, indent=2, sort_keys=True)
            f.write("\n")
    else:
        with open(path, "w") as f:
            for key in sorted(record):
                f.write(f"{key}={record[key]}\n")


def _write_report_csv(path, report) -> None:
    records = report.to_records()
    cols = list(records[0].keys())
    with open(path, "w") as f:
        f.write(",".join(cols) + "\n")
        for row in records:
            f.write(",".join(
                _g17(v) if isinstance(v, float) else str(v)
                for v in (row[c] for c in cols)) + "\n")


def _metadata_record(cfg: RunConfig, scn: Scenario, sol, runtime: float) -> dict:
    rec = {
        "scenario": scn.name or cfg.scenario,
        "variant": scn.variant.value,
        "method": sol.method,
        "cost": sol.cost,
        "dt": cfg.dt,
        "runtime_s": round(runtime, 3),
    }
    diag = sol.diagnostics
    if "iterations" in diag:
        rec["iterations"] = diag["iterations"]
        rec["termination"] = diag["termination"]
        rec["grad_inf"] = diag["grad_inf"]
    if "sl_cost" in diag:
        rec["sl_cost"] = diag["sl_cost"]
    if sol.method in ("sl", "sl-dal"):
        rec["nodes_per_axis"] = cfg.grid
        rec["control_mesh"] = "x".join(str(m) for m in cfg.control_mesh)
    return rec


# ---------------------------------------------------------------------------
# run

def _initial_schedule(cfg: RunConfig, scn: Scenario, grid: TimeGrid):
    """Resolve --init-control: constants "a,b", a trajectory CSV, or "sl"."""
    src = cfg.init_control
    if src is None or src == "sl":
        return None
    if os.path.exists(src):
        file_grid, _, controls = read_trajectory_csv(src)
        if file_grid != grid:
            raise ConfigError(f"{src}: control grid does not match the run "
                              f"(t0/T/n_max differ)")
        return controls
    parts = src.split(",")
    if len(parts) == 2:
        try:
            a, b = float(parts[0]), float(parts[1])
        except ValueError:
            raise ConfigError(f"bad --init-control {src!r}") from None
        return ControlSchedule.constant(grid, a, b)
    raise ConfigError(f"--init-control {src!r} is neither constants 'a,b', "
                      f"an existing CSV file, nor 'sl'")


def run(cfg: RunConfig) -> int:
    """Execute one configured solve; returns the process exit code."""
    scn = load_scenario(cfg.scenario)
    grid = TimeGrid.for_scenario(scn, cfg.dt)
    spec = GridSpec(nodes_per_axis=cfg.grid, control_mesh=cfg.control_mesh)
    os.makedirs(cfg.out_dir, exist_ok=True)
    prefix = os.path.join(cfg.out_dir, scn.name or "scenario")
    ext = "json" if cfg.fmt == "json" else "txt"
    keep_value = cfg.dump_value is not None

    t_start = time.perf_counter()
    if cfg.summary:
        sol_u = pipeline.solve_uncontrolled(scn, grid)
        sol = pipeline.solve_combined(scn, grid, spec, cfg.dal,
                                      backend=cfg.backend,
                                      keep_value=keep_value)
        dev = pipeline.trajectory_deviation(sol.diagnostics["sl_trajectory"],
                                            sol.trajectory)
        runtime = time.perf_counter() - t_start
        rec = _metadata_record(cfg, scn, sol, runtime)
        rec.update({
            "cost_uncontrolled": sol_u.cost,
            "cost_sl": sol.diagnostics["sl_cost"],
            "cost_sl_dal": sol.cost,
            "deviation_s": float(dev[0]),
            "deviation_e": float(dev[1]),
            "deviation_i": float(dev[2]),
        })
        print(f"{'scenario':<12}{'J_U':>14}{'J_SL':>14}{'J_SL-DAL':>14}"
              f"{'|ds|':>11}{'|de|':>11}{'|di|':>11}")
        print(f"{rec['scenario']:<12}{sol_u.cost:>14.6f}"
              f"{sol.diagnostics['sl_cost']:>14.6f}{sol.cost:>14.6f}"
              f"{dev[0]:>11.6f}{dev[1]:>11.6f}{dev[2]:>11.6f}")
        _write_metadata(f"{prefix}_summary_meta.{ext}", rec, cfg.fmt)
        write_trajectory_csv(f"{prefix}_sl-dal_trajectory.csv", scn,
                             sol.trajectory, sol.controls)
    else:
        if cfg.method == "uncontrolled":
            sol = pipeline.solve_uncontrolled(scn, grid)
        elif cfg.method == "sl":
            sol = pipeline.solve_sl(scn, grid, spec, backend=cfg.backend,
                                    keep_value=keep_value)
        elif cfg.method == "dal":
            if cfg.init_control == "sl":
                sol = pipeline.solve_combined(scn, grid, spec, cfg.dal,
                                              backend=cfg.backend,
                                              keep_value=keep_value)
            else:
                initial = _initial_schedule(cfg, scn, grid)
                sol = pipeline.solve_dal(scn, grid, initial, cfg.dal,
                                         backend=cfg.backend)
        else:
            sol = pipeline.solve_combined(scn, grid, spec, cfg.dal,
                                          backend=cfg.backend,
                                          keep_value=keep_value)
        runtime = time.perf_counter() - t_start
        rec = _metadata_record(cfg, scn, sol, runtime)
        write_trajectory_csv(f"{prefix}_{sol.method}_trajectory.csv", scn,
                             sol.trajectory, sol.controls)
        print(f"{rec['scenario']} {sol.method}: J = {sol.cost:.6f}")
        if cfg.check_optimality:
            r1 = checks_mod.check_first_order(scn, sol)
            r2 = checks_mod.check_second_order(scn, sol)
            _write_report_csv(f"{prefix}_{sol.method}_optimality1.csv", r1)
            _write_report_csv(f"{prefix}_{sol.method}_optimality2.csv", r2)
            rec["first_order_pass_fraction"] = r1.pass_fraction
            rec["first_order_max_violation"] = r1.max_violation
            rec["second_order_pass_fraction"] = r2.pass_fraction
            rec["second_order_max_violation"] = r2.max_violation
        _write_metadata(f"{prefix}_{sol.method}_meta.{ext}", rec, cfg.fmt)

    if keep_value:
        vg = sol.diagnostics.get("value_grid")
        policy = sol.diagnostics.get("policy")
        if vg is None:
            raise ConfigError("--dump-value: no value function was computed")
        hjb_mod.dump_value(vg, policy, cfg.dump_value)
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="seiropt",
        description="Optimal-control solvers for seasonal SEIR scenarios "
                    "(grid dynamic programming, adjoint descent, combined).")
    p.add_argument("--scenario", required=True,
                   help=f"preset ({', '.join(PRESET_NAMES)}) or scenario file")
    p.add_argument("--method", choices=METHODS, default="sl-dal")
    p.add_argument("--grid", type=int, default=60,
                   help="state-grid nodes per axis (default 60)")
    p.add_argument("--control-mesh", default="30,30", metavar="M1,M2",
                   help="control-mesh resolution (default 30,30)")
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--sigma0", type=float, default=0.5,
                   help="initial descent step")
    p.add_argument("--eps", type=float, default=1e-8,
                   help="descent tolerance on |dJ|")
    p.add_argument("--max-iters", type=int, default=50_000)
    p.add_argument("--max-halvings", type=int, default=40)
    p.add_argument("--init-control", default=None, metavar="SRC",
                   help="descent start: constants 'a,b', a trajectory CSV, "
                        "or 'sl' (warm start from the grid solver)")
    p.add_argument("--out", default=".", dest="out_dir", metavar="DIR")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   dest="fmt", help="metadata format")
    p.add_argument("--check-optimality", action="store_true")
    p.add_argument("--summary", action="store_true",
                   help="run uncontrolled + sl + sl-dal and print a cost row")
    p.add_argument("--dump-value", default=None, metavar="FILE",
                   help="write the value-function binary dump")
    p.add_argument("--backend", choices=("auto", "numba", "numpy"),
                   default="auto")
    p.add_argument("--workers", type=int, default=None,
                   help=f"thread cap for the compiled backend "
                        f"(default ${WORKERS_ENV} or all cores)")
    return p


def _config_from_args(args) -> RunConfig:
    try:
        parts = [int(v) for v in args.control_mesh.split(",")]
        if len(parts) == 1:
            parts = parts * 2
        if len(parts) != 2:
            raise ValueError
    except ValueError:
        raise ConfigError(
            f"bad --control-mesh {args.control_mesh!r}, expected M1,M2"
        ) from None
    try:
        dal_cfg = DalConfig(sigma0=args.sigma0, eps=args.eps,
                            max_iters=args.max_iters,
                            max_halvings=args.max_halvings)
        grid_probe = GridSpec(nodes_per_axis=args.grid,
                              control_mesh=tuple(parts))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(
        scenario=args.scenario, method=args.method,
        grid=grid_probe.nodes_per_axis, control_mesh=tuple(parts),
        dt=args.dt, dal=dal_cfg, init_control=args.init_control,
        out_dir=args.out_dir, fmt=args.fmt,
        check_optimality=args.check_optimality, summary=args.summary,
        dump_value=args.dump_value,
        backend=None if args.backend == "auto" else args.backend)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse already printed the diagnostic
        return int(exc.code or 0)
    if args.workers is not None:
        os.environ[WORKERS_ENV] = str(args.workers)
    try:
        cfg = _config_from_args(args)
        return run(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (IntegrationBlowupError, hjb_mod.HjbError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
