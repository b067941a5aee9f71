"""Command-line front end: ``endex <subcommand> [--config FILE] [--out DIR]``.

Subcommands
-----------
steady       one Newton steady state with eigenvalues
sweep        a steady-state branch (``--param``/``--range`` or the config sweep)
integrate    a transient trajectory with optional timed events
scenario     one or more named campaigns (``all`` runs every one)
eig          eigenvalues of the Jacobian at a given or steady state
fold-locus   continue the first fold of a branch in a second parameter

Exit status is 0 on success, 2 when a solver fails to converge (partial
output is still written and marked ``truncated``) and 3 for configuration
errors.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import scipy

from . import __version__, model
from .config import ConfigError, RunConfig, config_from_mapping, load_config, parse_quantity
from .continuation import (
    Branch,
    DegenerateLocusError,
    SeedError,
    solve_steady,
    trace_fold_locus,
)
from .model import DomainError
from .numerics import ConvergenceError, StiffnessError, Trajectory, classify, eigenvalues, fd_jacobian
from .params import PARAMETERS, ParameterError, si_unit
from .scenarios import REGISTRY, Run, ScenarioResult, ScenarioSpec, Sweep, execute, run_scenario

log = logging.getLogger("endex")

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 2, 3

BRANCH_COLUMNS = (
    "param", "c1", "T1", "c2", "T2", "p1", "p1_eq", "p2", "p2_eq", "conversion",
    "max_re_lambda", "stability",
)
TRAJECTORY_COLUMNS = ("t", "c1", "T1", "c2", "T2", "p1", "p1_eq", "p2", "p2_eq")
SOLVER_ERRORS = (ConvergenceError, SeedError, StiffnessError, DegenerateLocusError, DomainError)


class SolverFailure(RuntimeError):
    """A run ended without a usable result."""


# -- serialisation ---------------------------------------------------------


def fmt(v: Any) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return format(float(v), ".12g")


def _state4(x) -> list[float]:
    x = list(map(float, x))
    return x + [math.nan] * (4 - len(x))


def branch_rows(b: Branch) -> list[list[str]]:
    rows = []
    for r in b.records:
        d = r.derived
        rows.append([fmt(v) for v in (
            r.param_value, *_state4(r.state), d["p1"], d["p1_eq"], d["p2"], d["p2_eq"],
            d["conversion"], r.stability.max_real_part,
        )] + [r.stability.kind])
    return rows


def trajectory_rows(traj: Trajectory, run: Run) -> list[list[str]]:
    rows = []
    for t, x in zip(traj.times, traj.states):
        d = model.derived_quantities(x, run.params, run.mode)
        rows.append([fmt(v) for v in (t, *_state4(x), d["p1"], d["p1_eq"], d["p2"], d["p2_eq"])])
    return rows


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> int:
    n = 0
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)
            n += 1
    return n


def _json_safe(v: Any) -> Any:
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return float(fmt(v)) if math.isfinite(v) else str(v)
    if isinstance(v, complex):
        return [_json_safe(v.real), _json_safe(v.imag)]
    if isinstance(v, dict):
        return {str(k): _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_json_safe(x) for x in v]
    return v


def _run_summary(run: Run, filename: str, rows: int) -> dict[str, Any]:
    out: dict[str, Any] = {
        "label": run.label, "kind": run.kind, "mode": run.mode, "file": filename, "rows": rows,
        "truncated": run.truncated,
    }
    if run.branch is not None:
        b = run.branch
        stable = sum(r.stability.stable for r in b.records)
        out["param"] = b.param_name
        out["stability_counts"] = {"stable": stable, "unstable": len(b) - stable}
        out["singular_points"] = [
            {
                "kind": s.kind, "label": s.label, "param_value": s.param_value,
                "state": list(s.state), "crossing_eigenvalue": complex(s.crossing_eigenvalue),
                "confident": s.confident,
            }
            for s in b.singular_points
        ]
    else:
        out["event_log"] = [{"time": t, "description": d} for t, d in run.trajectory.event_log]
    return out


def provenance(cfg: RunConfig, params) -> dict[str, Any]:
    return {
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "tool": "endex",
        "tool_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "parameters": {
            k: {"value": v, "unit": si_unit(k)} for k, v in params.as_flat_dict().items()
        },
        "config": cfg.to_dict(),
    }


def write_result(result: ScenarioResult, cfg: RunConfig, outdir: Path, command: str) -> dict:
    """Write one CSV per run plus ``summary.json``; return the summary."""
    outdir.mkdir(parents=True, exist_ok=True)
    runs = []
    for run in result.runs:
        name = run.kind if run.label == run.kind else f"{run.kind}_{run.label}"
        path = outdir / f"{name}.csv"
        if run.branch is not None:
            n = write_csv(path, BRANCH_COLUMNS, branch_rows(run.branch))
        else:
            n = write_csv(path, TRAJECTORY_COLUMNS, trajectory_rows(run.trajectory, run))
        runs.append(_run_summary(run, path.name, n))
    tables = {}
    for name, rows in result.tables.items():
        path = outdir / f"table_{name}.csv"
        header = list(rows[0]) if rows else []
        n = write_csv(path, header, ([fmt(r[k]) for k in header] for r in rows))
        tables[name] = {"file": path.name, "rows": n}
    summary = {
        "command": command,
        "scenario": result.name,
        "truncated": result.truncated,
        "runs": runs,
        "tables": tables,
        "metrics": result.metrics,
        "notes": result.notes,
        "provenance": provenance(cfg, cfg.params),
    }
    write_json(outdir / "summary.json", summary)
    return summary


def write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(_json_safe(data), indent=2, allow_nan=False) + "\n")


# -- commands --------------------------------------------------------------


def _outdir(args, cfg: RunConfig) -> Path:
    return Path(args.out or cfg.output or "endex_out")


def _status(result: ScenarioResult) -> int:
    return EXIT_SOLVER if result.truncated else EXIT_OK


def cmd_steady(args, cfg: RunConfig) -> int:
    P = cfg.params
    rec = solve_steady(P, cfg.mode, guess=cfg.initial_state, tol=cfg.tolerances.newton)
    out = _outdir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    names = ("c1", "T1", "c2", "T2")
    summary = {
        "command": "steady",
        "mode": cfg.mode,
        "state": dict(zip(names, rec.state)),
        "residual_norm": rec.residual_norm,
        "eigenvalues": list(rec.eigen.values),
        "stability": {
            "kind": rec.stability.kind, "oscillatory": rec.stability.oscillatory,
            "max_real_part": rec.stability.max_real_part,
        },
        "derived": rec.derived,
        "provenance": provenance(cfg, P),
    }
    write_json(out / "summary.json", summary)
    for k, v in zip(names, rec.state):
        print(f"{k:>4} = {fmt(v)}")
    print(f"stability: {rec.stability.kind} (max Re = {fmt(rec.stability.max_real_part)})")
    return EXIT_OK


def _sweeps(args, cfg: RunConfig) -> list[Sweep]:
    if args.param:
        if not args.range:
            raise ConfigError("--param needs --range LO HI")
        unit = si_unit(args.param) if args.param in PARAMETERS else None
        if unit is None:
            raise ConfigError(f"--param: unknown parameter {args.param!r}")
        lo, hi = (parse_quantity(v, unit, "--range") for v in args.range)
        try:
            return [Sweep(args.param, lo, hi, args.points, args.start)]
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None
    if not cfg.sweeps:
        raise ConfigError("no sweep given: use --param/--range or a 'sweep' section")
    return cfg.sweeps


def cmd_sweep(args, cfg: RunConfig) -> int:
    sweeps = _sweeps(args, cfg)
    cfg.sweeps = sweeps
    spec = ScenarioSpec(
        "sweep", base_params=cfg.params, mode=cfg.mode, output_kind="branch",
        sweep=sweeps[0] if len(sweeps) == 1 else tuple(sweeps),
    )
    result = execute(spec, cfg.tolerances)
    write_result(result, cfg, _outdir(args, cfg), "sweep")
    for run in result.runs:
        b = run.branch
        print(f"{run.label}: {len(b)} records, {len(b.folds())} folds, {len(b.hopfs())} Hopf"
              + (" (truncated)" if b.truncated else ""))
    return _status(result)


def cmd_integrate(args, cfg: RunConfig) -> int:
    if args.t_end is not None:
        cfg.t_end = parse_quantity(args.t_end, "s", "--t-end")
    spec = ScenarioSpec(
        "integrate", base_params=cfg.params, mode=cfg.mode, output_kind="trajectory",
        events=tuple(cfg.events), t_end=cfg.t_end, sample_dt=cfg.sample_dt,
        initial_state=cfg.initial_state,
    )
    result = execute(spec, cfg.tolerances)
    write_result(result, cfg, _outdir(args, cfg), "integrate")
    traj = result.runs[0].trajectory
    print(f"{len(traj)} samples, final state {[fmt(v) for v in traj.final]}")
    return EXIT_OK


def _one_scenario(name: str, cfg_raw: dict, outdir: str) -> tuple[str, int, str]:
    """Worker: run a named scenario and write its outputs (picklable entry point)."""
    cfg = config_from_mapping(cfg_raw)
    if cfg.scenario != name:
        cfg.scenario, cfg.options = name, {}
    try:
        result = run_scenario(name, cfg.params, cfg.tolerances, **cfg.options)
    except SOLVER_ERRORS as exc:
        return name, EXIT_SOLVER, f"{type(exc).__name__}: {exc}"
    write_result(result, cfg, Path(outdir), "scenario")
    status = _status(result)
    return name, status, "truncated" if status else "ok"


def cmd_scenario(args, cfg: RunConfig) -> int:
    names = list(args.names) or ([cfg.scenario] if cfg.scenario else [])
    if not names:
        raise ConfigError("scenario: give a name, 'all', or set 'scenario' in the config")
    if names == ["all"]:
        names = list(REGISTRY)
    for n in names:
        if n not in REGISTRY:
            raise ConfigError(f"unknown scenario {n!r}; available: {', '.join(REGISTRY)}")
    if cfg.options and names != [cfg.scenario]:
        raise ConfigError("options apply only to the scenario named in the config")
    base = _outdir(args, cfg)
    raw = cfg.to_dict()
    dirs = [str(base if len(names) == 1 else base / n) for n in names]
    if args.jobs > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_one_scenario, names, [raw] * len(names), dirs))
    else:
        results = [_one_scenario(n, raw, d) for n, d in zip(names, dirs)]
    worst = EXIT_OK
    for name, status, message in results:
        print(f"{name}: {message}")
        worst = max(worst, status)
    return worst


def cmd_eig(args, cfg: RunConfig) -> int:
    P = cfg.params
    if args.state:
        x = np.array([float(v) for v in args.state])
        if x.size != (4 if cfg.mode == "endex" else 2):
            raise ConfigError(f"--state needs {4 if cfg.mode == 'endex' else 2} values for mode {cfg.mode}")
    else:
        x = solve_steady(P, cfg.mode, guess=cfg.initial_state, tol=cfg.tolerances.newton).state
    f = model.rhs_for(cfg.mode)
    J = fd_jacobian(lambda y: f(y, P), x, scale=model.fd_scale(cfg.mode))
    e = eigenvalues(J)
    for lam in e.values:
        print(f"{lam.real: .12g} {lam.imag:+.12g}j")
    c = classify(e)
    print(f"stability: {c.kind}" + (" (oscillatory)" if c.oscillatory else ""))
    return EXIT_OK


def cmd_fold_locus(args, cfg: RunConfig) -> int:
    sweeps = _sweeps(args, cfg)
    if not args.second or not args.second_range:
        raise ConfigError("fold-locus needs --second NAME and --second-range LO HI")
    if args.second not in PARAMETERS:
        raise ConfigError(f"--second: unknown parameter {args.second!r}")
    unit = si_unit(args.second)
    nu = tuple(parse_quantity(v, unit, "--second-range") for v in args.second_range)
    sw = sweeps[0]
    P = cfg.params.with_values(**{args.second: nu[0]})
    spec = ScenarioSpec("fold-locus", base_params=P, mode=cfg.mode, sweep=sw)
    result = execute(spec, cfg.tolerances)
    b = result.runs[0].branch
    if not b.folds():
        raise SolverFailure(f"no fold on the {sw.param} branch at {args.second} = {nu[0]:g}")
    locus = trace_fold_locus(P, b.folds()[0], sw.param, args.second, nu, mode=cfg.mode)
    out = _outdir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    rows = [[fmt(a), fmt(c)] for a, c in locus.points]
    write_csv(out / "fold_locus.csv", (sw.param, args.second), rows)
    write_json(out / "summary.json", {
        "command": "fold-locus", "points": len(locus), "truncated": not locus.complete,
        "provenance": provenance(cfg, P),
    })
    print(f"{len(locus)} locus points" + ("" if locus.complete else " (truncated)"))
    return EXIT_OK if locus.complete else EXIT_SOLVER


# -- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="endex", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"endex {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--out", help="output directory (default: endex_out)")
    common.add_argument("--set", action="append", default=[], metavar="NAME=QTY",
                        help="override one parameter, e.g. --set 'Fs=20 kg/s'")
    common.add_argument("--mode", choices=model.MODES)
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("steady", parents=[common], help="single steady state")

    def add_sweep_args(sp):
        sp.add_argument("--param", help="bifurcation parameter")
        sp.add_argument("--range", nargs=2, metavar=("LO", "HI"), help="e.g. '973 K' '1273 K'")
        sp.add_argument("--points", type=int, default=200, help="initial step = range/points")
        sp.add_argument("--start", choices=("lo", "hi"), default="lo")

    add_sweep_args(sub.add_parser("sweep", parents=[common], help="steady-state branch"))
    sp = sub.add_parser("integrate", parents=[common], help="transient trajectory")
    sp.add_argument("--t-end", help="end time, e.g. '600 s'")
    sp = sub.add_parser("scenario", parents=[common], help="named campaign(s)")
    sp.add_argument("names", nargs="*", help=f"one or more of: all, {', '.join(REGISTRY)}")
    sp.add_argument("--jobs", type=int, default=1, help="run scenarios concurrently")
    sp = sub.add_parser("eig", parents=[common], help="Jacobian eigenvalues")
    sp.add_argument("--state", nargs="+", help="state in SI (default: the steady state)")
    sp = sub.add_parser("fold-locus", parents=[common], help="two-parameter fold locus")
    add_sweep_args(sp)
    sp.add_argument("--second", help="second parameter")
    sp.add_argument("--second-range", nargs=2, metavar=("LO", "HI"))
    return p


COMMANDS = {
    "steady": cmd_steady,
    "sweep": cmd_sweep,
    "integrate": cmd_integrate,
    "scenario": cmd_scenario,
    "eig": cmd_eig,
    "fold-locus": cmd_fold_locus,
}


def _apply_cli_overrides(args, cfg: RunConfig) -> None:
    for item in args.set:
        name, sep, qty = item.partition("=")
        name = name.strip()
        if not sep or name not in PARAMETERS:
            raise ConfigError(f"--set: expected NAME=QUANTITY with a known NAME, got {item!r}")
        cfg.parameters[name] = parse_quantity(qty, si_unit(name), f"--set {name}")
    if args.mode:
        cfg.mode = args.mode
    try:
        cfg.params
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None


def run(argv: Sequence[str] | None = None) -> int:
    """Parse *argv*, execute the subcommand and return the exit status."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        _apply_cli_overrides(args, cfg)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, ParameterError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (*SOLVER_ERRORS, SolverFailure) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
