"""Command-line surface: simulate, spectrum, check, sweep.

Configuration comes from a single JSON file plus flag overrides; every run
writes a manifest whose hash covers all inputs that determine the outputs,
and reruns with identical manifests reproduce the CSVs byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from multiprocessing import get_context
from pathlib import Path

from . import __version__
from .analyzer import analyze, plot_timeline, write_timeline_csv
from .evolution import SolverConfig, evolve, write_trajectory_csv
from .grids import RadialGrid
from .initial_data import INITIAL_KINDS, build_initial
from .manifests import (
    ConstantsManifest,
    RunManifest,
    save_constants,
    save_run_manifest,
)
from .spectral import SpectralError
from .suites import SUITES, junit_xml, run_suites

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3

_DEFAULTS = {
    "dimension": 5,
    "grid_points": 1024,
    "r_max": 2e4,
    "grading": "geometric:1.02",
    "t_max": 1.0,
    "dt_init": 1e-6,
    "dt_min": 1e-13,
    "dt_max": 5e-2,
    "err_tol": 1e-6,
    "blowup_threshold": 1e4,
    "snapshot_dt": None,
    "initial": "bubble",
    "amplitude": 1.0,
    "scales": [1.0],
    "signs": [1],
    "width": 1.0,
    "initial_file": None,
    "n_max": 3,
    "output_dir": "out",
    "plots": False,
}


class ConfigError(ValueError):
    pass


def _merge_config(args: argparse.Namespace) -> dict:
    cfg = dict(_DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config file: {exc}") from exc
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise ConfigError(f"config file: unknown fields {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if cfg["snapshot_dt"] is None:
        cfg["snapshot_dt"] = max(cfg["t_max"] / 20.0, 1e-12)
    return cfg


def _build_grid(cfg: dict) -> RadialGrid:
    D = int(cfg["dimension"])
    if D < 3:
        raise ConfigError(f"dimension must be >= 3, got {D}")
    n = int(cfg["grid_points"])
    grading = str(cfg["grading"])
    if grading == "uniform":
        return RadialGrid.uniform(D, n, float(cfg["r_max"]))
    if grading.startswith("geometric"):
        ratio = 1.02
        if ":" in grading:
            try:
                ratio = float(grading.split(":", 1)[1])
            except ValueError as exc:
                raise ConfigError(f"bad grading ratio in {grading!r}") from exc
        return RadialGrid.geometric(D, n, float(cfg["r_max"]), ratio)
    raise ConfigError(f"unknown grading {grading!r} (uniform | geometric[:ratio])")


def _run_simulation(cfg: dict, outdir: Path) -> dict:
    """Shared by simulate and sweep cells; returns a summary row."""
    grid = _build_grid(cfg)
    try:
        initial, init_desc = build_initial(
            cfg["initial"],
            grid,
            amplitude=float(cfg["amplitude"]),
            scales=tuple(float(x) for x in cfg["scales"]),
            signs=tuple(int(x) for x in cfg["signs"]),
            width=float(cfg["width"]),
            path=cfg["initial_file"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    solver = SolverConfig(
        t_end=float(cfg["t_max"]),
        dt_init=float(cfg["dt_init"]),
        dt_min=float(cfg["dt_min"]),
        dt_max=float(cfg["dt_max"]),
        err_tol=float(cfg["err_tol"]),
        blowup_threshold=float(cfg["blowup_threshold"]),
        snapshot_dt=float(cfg["snapshot_dt"]),
    )
    t0 = time.time()
    traj = evolve(initial, solver)
    timeline = analyze(traj, n_max=int(cfg["n_max"]))
    wall = time.time() - t0

    outdir.mkdir(parents=True, exist_ok=True)
    traj_csv = outdir / "trajectory.csv"
    tl_csv = outdir / "timeline.csv"
    write_trajectory_csv(traj, traj_csv)
    write_timeline_csv(timeline, tl_csv, n_max=int(cfg["n_max"]))
    snapdir = outdir / "snapshots"
    snapdir.mkdir(exist_ok=True)
    from .grids import save_field_csv

    for k, (t, fld) in enumerate(traj.snapshots):
        save_field_csv(snapdir / f"snap_{k:04d}.csv", fld, extra={"t": float(t)})
    outputs = {
        "trajectory": traj_csv.name,
        "timeline": tl_csv.name,
        "snapshots": len(traj.snapshots),
    }
    if cfg["plots"]:
        outputs["plots"] = [str(Path(p).name) for p in
                            plot_timeline(timeline, outdir / "plots")]
    manifest = RunManifest(
        tool_version=__version__,
        dimension=grid.dimension,
        grid=grid.descriptor(),
        solver={
            "t_end": solver.t_end,
            "dt_init": solver.dt_init,
            "dt_min": solver.dt_min,
            "dt_max": solver.dt_max,
            "err_tol": solver.err_tol,
            "blowup_threshold": solver.blowup_threshold,
            "snapshot_dt": solver.snapshot_dt,
            "boundary": solver.boundary,
        },
        initial=init_desc,
        constants_ref="packaged",
        outputs=outputs,
        wall_clock_s=wall,
        termination=traj.termination,
    ).finalize()
    save_run_manifest(manifest, outdir / "manifest.json")
    return {
        "termination": traj.termination,
        "classification": timeline.classification,
        "blowup_flag": int(traj.blown_up),
        "t_plus": traj.t_plus,
        "t_plus_residual": traj.t_plus_residual,
        "final_enorm": traj.records[-1].enorm,
        "config_hash": manifest.config_hash,
    }


def cmd_simulate(args) -> int:
    try:
        cfg = _merge_config(args)
        summary = _run_simulation(cfg, Path(cfg["output_dir"]))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # solver-level failure
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(
        f"terminated: {summary['termination']}; outcome: {summary['classification']}"
        + (f"; T_plus ~ {summary['t_plus']:.6g}" if summary["blowup_flag"] else "")
    )
    return EXIT_OK


def cmd_spectrum(args) -> int:
    from .bubbles import bubble_enorm
    from .spectral import build_z_profile, negative_eigenpair, spectrum_grid

    D = int(args.dimension)
    if D < 3:
        print(f"config error: dimension must be >= 3, got {D}", file=sys.stderr)
        return EXIT_CONFIG
    n = int(args.grid_points) if args.grid_points else 2**19
    grid = spectrum_grid(D, n=n, r_max=args.r_max)
    try:
        ep = negative_eigenpair(D, grid)
        zp = build_z_profile(D, ep)
    except SpectralError as exc:
        print(f"spectral failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    from .manifests import load_constants

    try:
        packaged = load_constants(D)
        c0, eta, modblock = packaged.c0, packaged.eta, packaged.modulation
    except Exception:
        c0, eta, modblock = float("nan"), float("nan"), {}
    manifest = ConstantsManifest(
        dimension=D,
        grid=grid.descriptor(),
        kappa2=ep.kappa2,
        c0=c0,
        eta=eta,
        z_profile=zp.params(),
        modulation=modblock,
        provenance="cli:spectrum",
    )
    outdir = Path(args.output_dir or "out")
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / f"constants_D{D}.json"
    save_constants(manifest, path)
    print(f"kappa^2 = {ep.kappa2!r}")
    print(f"||W||_E = {bubble_enorm(D)!r}")
    print(f"constants manifest: {path}")
    return EXIT_OK


def cmd_check(args) -> int:
    names = list(SUITES) if not args.suite else [s.strip() for s in args.suite.split(",")]
    for name in names:
        if name not in SUITES:
            print(f"unknown suite {name!r}; available: {', '.join(SUITES)}", file=sys.stderr)
            return EXIT_CONFIG
    D = int(args.dimension or 5)
    results = run_suites(names, D)
    failed = [r for r in results if not r.passed]
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        print(f"[{mark}] {r.suite}/{r.name}: {r.detail}")
    outdir = Path(args.output_dir or "out")
    outdir.mkdir(parents=True, exist_ok=True)
    report = outdir / "check_report.xml"
    report.write_text(junit_xml(results))
    print(f"report: {report} ({len(results) - len(failed)}/{len(results)} passed)")
    if failed:
        print("failing properties:", ", ".join(f"{r.suite}/{r.name}" for r in failed))
        return EXIT_FAIL
    return EXIT_OK


def _sweep_cell(payload):
    idx, cell_cfg, outdir = payload
    try:
        summary = _run_simulation(cell_cfg, Path(outdir))
        summary["status"] = "ok"
    except Exception as exc:
        summary = {"status": f"failed: {exc}"}
    summary["cell"] = idx
    return idx, summary


def cmd_sweep(args) -> int:
    try:
        with open(args.spec) as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: sweep spec: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    axes = spec.get("axes") or {}
    if not axes or any(not vals for vals in axes.values()):
        print("config error: sweep spec needs non-empty axes", file=sys.stderr)
        return EXIT_CONFIG
    base = dict(_DEFAULTS)
    unknown = set(spec) - set(base) - {"axes"}
    if unknown:
        print(f"config error: unknown sweep fields {sorted(unknown)}", file=sys.stderr)
        return EXIT_CONFIG
    base.update({k: v for k, v in spec.items() if k != "axes"})
    if base["snapshot_dt"] is None:
        base["snapshot_dt"] = max(base["t_max"] / 20.0, 1e-12)

    import itertools

    keys = sorted(axes)
    cells = []
    outroot = Path(args.output_dir or "sweep_out")
    for idx, combo in enumerate(itertools.product(*(axes[k] for k in keys))):
        cell_cfg = dict(base)
        cell_cfg.update(dict(zip(keys, combo)))
        cells.append((idx, cell_cfg, str(outroot / f"cell_{idx:04d}")))

    jobs = max(int(args.jobs or 1), 1)
    if jobs == 1:
        results = [_sweep_cell(c) for c in cells]
    else:
        with get_context("spawn").Pool(jobs) as pool:
            results = pool.map(_sweep_cell, cells)
    results.sort(key=lambda kv: kv[0])

    outroot.mkdir(parents=True, exist_ok=True)
    table = outroot / "phase_table.csv"
    cols = keys + ["classification", "blowup_flag", "t_plus", "final_enorm", "status"]
    with open(table, "w") as fh:
        fh.write("cell," + ",".join(cols) + "\n")
        for idx, summary in results:
            axis_vals = [repr(float(cells[idx][1][k])) for k in keys]
            t_plus = summary.get("t_plus")
            fin = summary.get("final_enorm")
            row = [str(idx)] + axis_vals + [
                str(summary.get("classification", "")),
                str(summary.get("blowup_flag", "")),
                repr(float(t_plus)) if t_plus is not None else "",
                repr(float(fin)) if fin is not None else "",
                summary["status"],
            ]
            fh.write(",".join(row) + "\n")
    hard_fail = [s for _, s in results if s["status"] != "ok"]
    print(f"sweep: {len(cells) - len(hard_fail)}/{len(cells)} cells ok; table: {table}")
    return EXIT_FAIL if hard_fail else EXIT_OK


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--dimension", type=int)
    p.add_argument("--grid-points", dest="grid_points", type=int)
    p.add_argument("--r-max", dest="r_max", type=float)
    p.add_argument("--grading", help="uniform | geometric[:ratio]")
    p.add_argument("--t-max", dest="t_max", type=float)
    p.add_argument("--dt-init", dest="dt_init", type=float)
    p.add_argument("--dt-min", dest="dt_min", type=float)
    p.add_argument("--blowup-threshold", dest="blowup_threshold", type=float)
    p.add_argument("--initial", choices=INITIAL_KINDS)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--scales", type=lambda s: [float(x) for x in s.split(",")])
    p.add_argument("--signs", type=lambda s: [int(x) for x in s.split(",")])
    p.add_argument("--width", type=float)
    p.add_argument("--initial-file", dest="initial_file")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--plots", action="store_true", default=None)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bubbleflow",
        description="Radial energy-critical heat flow laboratory",
    )
    parser.add_argument("--version", action="version", version=f"bubbleflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="evolve, analyze, write CSVs and manifest")
    _add_common_flags(p_sim)

    p_spec = sub.add_parser("spectrum", help="negative eigenpair and constants manifest")
    p_spec.add_argument("--dimension", type=int, required=True)
    p_spec.add_argument("--grid-points", dest="grid_points", type=int)
    p_spec.add_argument("--r-max", dest="r_max", type=float)
    p_spec.add_argument("--output-dir", dest="output_dir")

    p_check = sub.add_parser("check", help="run the property suites")
    p_check.add_argument("--suite", help="comma-separated suite names (default: all)")
    p_check.add_argument("--dimension", type=int)
    p_check.add_argument("--output-dir", dest="output_dir")

    p_sweep = sub.add_parser("sweep", help="campaign over an initial-data grid")
    p_sweep.add_argument("--spec", required=True, help="sweep spec JSON")
    p_sweep.add_argument("--jobs", type=int)
    p_sweep.add_argument("--output-dir", dest="output_dir")

    args = parser.parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "spectrum": cmd_spectrum,
        "check": cmd_check,
        "sweep": cmd_sweep,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
