"""Command-line front end: figure data as CSV, configs and manifests as JSON.

Exit codes: 0 success, 1 usage error, 2 input error (missing or malformed
file, invalid parameters), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .accumulation import added_mass_whatif, critical_surface, hop_sequence, rebound_program, solve_critical_alpha
from .analyze import NoCyclesError, TrajectoryFormatError, analyze_file, fit_cda, parse_trajectory, write_extraction_csv
from .control import ProtocolConfig, run_protocol
from .core import RobotParams, default_params, experimental_params, validate
from .dynamics import DT_AIR, SimState, SimulationError, simulate
from .elastomer import (
    BAND_MASS_TOTAL,
    ROBOT_MASS,
    StressStrainCurve,
    curve_specific_energy,
    reference_curve,
    system_energy,
)
from .energy import cycle_records, write_ledger_csv
from .stance2dof import StanceParams, simulate_stance, stance_maps

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
MANIFEST_NAME = "manifest.json"
# Stored energy quoted alongside the 2.1-strain band budget; the band mass
# times the specific energy gives less (reported, not reconciled).
QUOTED_STORED_ENERGY = 16.63


class InputError(Exception):
    """Bad user-supplied file or value (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    command: list[str]
    config: dict
    outputs: list[str] = field(default_factory=list)
    tool_version: str = __version__
    determinism: str = "no randomness: identical invocations give byte-identical outputs (this manifest's wall_time excepted)"
    wall_time: float = 0.0

    def write(self, out: Path) -> Path:
        path = out / MANIFEST_NAME
        path.write_text(json.dumps(asdict(self), indent=2) + "\n")
        return path


def _floats(text: str) -> list[float]:
    """'a:b:n' (inclusive linspace) or 'x,y,z'."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            return [float(x) for x in np.linspace(float(a), float(b), int(n))]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'start:stop:count' or a comma list, got {text!r}") from None


def _load_params(args) -> RobotParams:
    if args.params:
        path = Path(args.params)
        if not path.is_file():
            raise InputError(f"parameter file not found: {path}")
        try:
            p = RobotParams.from_json(path)
        except (ValueError, TypeError, KeyError) as exc:
            raise InputError(f"{path}: {exc}") from None
    elif getattr(args, "experimental", False):
        p = experimental_params()
    else:
        p = default_params()
    report = validate(p)
    if not report.ok:
        raise InputError(f"invalid parameters:\n{report}")
    return p


def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


# --- subcommands: each returns (config snapshot, output paths) ---------------


def cmd_params(args, out: Path):
    p = _load_params(args)
    text = p.to_json()
    print(text)
    path = out / "params.json"
    path.write_text(text + "\n")
    return {"params": p.to_dict()}, [path]


def cmd_simulate(args, out: Path):
    p = _load_params(args)
    if args.no_drag:
        p = p.without_drag()
    seq = hop_sequence(p, args.alpha, args.h0, args.hops, dt=args.dt)
    paths = [out / "sequence.csv"]
    seq.to_csv(paths[0])
    if args.trace:
        traj = simulate(
            p, SimState.at_rest(args.h0, p), rebound_program(p, args.alpha), n_hops=args.hops, dt=args.dt,
            sample_dt=args.sample_dt,
        )
        traj.to_csv(out / "trajectory.csv")
        traj.events_to_csv(out / "events.csv")
        write_ledger_csv(cycle_records(traj, p), out / "ledger.csv")
        paths += [out / "trajectory.csv", out / "events.csv", out / "ledger.csv"]
    status = "ceased" if seq.ceased else "diverged" if seq.diverged else "ok"
    print(f"{len(seq.heights) - 1} hops, last apex {seq.heights[-1]:.6g} m ({status})")
    cfg = {"alpha": args.alpha, "h0": args.h0, "hops": args.hops, "dt": args.dt, "no_drag": args.no_drag}
    return {"params": p.to_dict(), **cfg}, paths


def cmd_critical(args, out: Path):
    p = _load_params(args)
    if args.single:
        r = solve_critical_alpha(p, args.href, dt=args.dt)
        path = out / "critical.json"
        result = {"alpha_crit": r.alpha, "F_crit": r.alpha * p.weight, "status": r.status.value, "h_ref": args.href}
        _write_json(path, result)
        print(f"critical alpha_r = {r.alpha:.6f} ({r.status.value}), F = {r.alpha * p.weight:.6f} N")
        return {"params": p.to_dict(), "single": True, "href": args.href, "dt": args.dt}, [path]
    mass_range = (args.mass_min, args.mass_max) if args.mass_min and args.mass_max else None
    grid = critical_surface(
        p,
        mass_range,
        (args.frac_min, args.frac_max),
        args.resolution,
        args.href,
        jobs=args.jobs,
        dt=args.dt,
    )
    path = out / "critical_surface.csv"
    grid.to_csv(path)
    failed = int(np.sum(~np.isfinite(grid.alpha_crit)))
    print(f"{grid.alpha_crit.size} cells, {failed} failed")
    cfg = {
        "params": p.to_dict(),
        "mass_range": [float(grid.masses[0]), float(grid.masses[-1])],
        "fraction_range": [args.frac_min, args.frac_max],
        "resolution": args.resolution,
        "href": args.href,
        "dt": args.dt,
    }
    return cfg, [path]


def cmd_whatif(args, out: Path):
    p = _load_params(args)
    rows = []
    for target in ("body", "foot"):
        r = added_mass_whatif(p, args.delta_m, target, args.href, dt=args.dt)
        rows.append([target, args.delta_m, r.alpha_crit_before, r.alpha_crit_after, r.F_crit_before, r.F_crit_after, r.force_ratio])
        print(f"+{args.delta_m * 1000:g} g on {target}: critical force x{r.force_ratio:.4f}")
    path = out / "whatif.csv"
    _write_rows(path, ["target", "delta_m", "alpha_before", "alpha_after", "F_before", "F_after", "force_ratio"], rows)
    return {"params": p.to_dict(), "delta_m": args.delta_m, "href": args.href, "dt": args.dt}, [path]


def cmd_stance(args, out: Path):
    sp = StanceParams()
    if args.stance_params:
        path = Path(args.stance_params)
        if not path.is_file():
            raise InputError(f"stance parameter file not found: {path}")
        try:
            sp = StanceParams(**json.loads(path.read_text()))
        except (ValueError, TypeError) as exc:
            raise InputError(f"{path}: {exc}") from None
    cfg = {"stance_params": asdict(sp)}
    if args.v is not None and args.theta is not None:
        o = simulate_stance(args.v, args.theta, sp)
        path = out / "stance.json"
        _write_json(path, asdict(o))
        pt = o.partition
        print(
            f"liftoff {o.liftoff_angle:.3f} deg, mu {o.mu_required:.4f}, vertical {pt.vertical:.4f}, "
            f"horizontal {pt.horizontal:.4f}, rotational {pt.rotational:.4f}, foot loss {pt.foot_loss:.4f}"
        )
        return {**cfg, "v_TD": args.v, "theta_TD": args.theta}, [path]
    maps = stance_maps(args.theta_range, args.v_range, sp, jobs=args.jobs)
    path = out / "stance_maps.csv"
    maps.to_csv(path)
    print(f"{len(args.v_range)} x {len(args.theta_range)} stance cells")
    return {**cfg, "v_range": args.v_range, "theta_range": args.theta_range}, [path]


def cmd_protocol(args, out: Path):
    p = _load_params(args)
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise InputError(f"protocol config not found: {path}")
        try:
            cfg = ProtocolConfig.from_json(path)
        except (ValueError, TypeError) as exc:
            raise InputError(f"{path}: {exc}") from None
    else:
        try:
            cfg = ProtocolConfig(
                alpha_pct=args.alpha_pct,
                blanking_ms=args.blanking_ms,
                cutoff_speed=args.cutoff,
                drop_height=args.drop,
                n_hops=args.hops,
            )
        except ValueError as exc:
            raise InputError(str(exc)) from None
    try:
        res = run_protocol(p, cfg)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    heights = out / "protocol_heights.csv"
    _write_rows(heights, ["cycle", "height"], [(i, float(h)) for i, h in enumerate(res.heights)])
    ledger = out / "protocol_ledger.csv"
    write_ledger_csv(res.records, ledger)
    traj = out / "trajectory.csv"
    res.trajectory.to_csv(traj)
    print(f"{len(res.records)} hops, apexes " + " ".join(f"{h:.4f}" for h in res.heights))
    return {"params": p.to_dict(), "protocol": asdict(cfg)}, [heights, ledger, traj]


def cmd_analyze(args, out: Path):
    p = _load_params(args)
    for f in args.files:
        if not Path(f).is_file():
            raise InputError(f"trajectory file not found: {f}")
    results = []
    try:
        for f in args.files:
            ex = analyze_file(f, p, args.window)
            results.append((Path(f).name, ex))
            print(f"{f}: {len(ex.hops)} hops extracted, {len(ex.skipped)} skipped")
            for k, why in ex.skipped:
                print(f"  hop {k} skipped: {why}")
    except (TrajectoryFormatError, NoCyclesError) as exc:
        raise InputError(str(exc)) from None
    path = out / "ledgers.csv"
    write_extraction_csv(results, path)
    paths = [path]
    if args.fit_cda:
        runs = [(parse_trajectory(f), p.m_T) for f in args.files]
        fit = fit_cda(runs, g=p.g, rho=p.rho)
        cda = out / "cda_fit.json"
        _write_json(cda, asdict(fit))
        print(f"CdA = {fit.intercept:.6f} + {fit.slope:.6f} |v|")
        paths.append(cda)
    return {"params": p.to_dict(), "files": [Path(f).name for f in args.files], "window": args.window}, paths


def discrepancy_report(specific: float, band_mass: float, quoted_stored: float = QUOTED_STORED_ENERGY) -> dict:
    computed = specific * band_mass
    return {
        "band_mass_kg": band_mass,
        "specific_energy_J_per_kg": specific,
        "computed_stored_J": computed,
        "quoted_stored_J": quoted_stored,
        "relative_difference": (computed - quoted_stored) / quoted_stored,
        "note": "documented source discrepancy: band mass x specific energy does not give the quoted stored energy; not reconciled",
    }


def cmd_elastomer(args, out: Path):
    if args.curve:
        path = Path(args.curve)
        if not path.is_file():
            raise InputError(f"curve file not found: {path}")
        if args.density is None:
            raise InputError("--density is required with --curve")
        try:
            curve = StressStrainCurve.from_csv(path, args.density)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    else:
        curve = reference_curve()
    try:
        specific = curve_specific_energy(curve, args.strain)
        max_specific = curve_specific_energy(curve, float(curve.strain[-1]))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    stored, system_specific = system_energy(specific, args.band_mass, args.robot_mass)
    q_stored, q_system = system_energy(QUOTED_STORED_ENERGY / args.band_mass, args.band_mass, args.robot_mass)
    result = {
        "strain": args.strain,
        "density": curve.density,
        "specific_energy_J_per_kg": specific,
        "max_specific_energy_J_per_kg": max_specific,
        "stored_J": stored,
        "system_specific_J_per_kg": system_specific,
        "quoted_stored_J": q_stored,
        "quoted_system_specific_J_per_kg": q_system,
        "discrepancy": discrepancy_report(specific, args.band_mass),
    }
    path = out / "elastomer.json"
    _write_json(path, result)
    paths = [path]
    if not args.curve:
        curve.to_csv(out / "reference_curve.csv")
        paths.append(out / "reference_curve.csv")
    d = result["discrepancy"]
    print(f"specific energy at strain {args.strain:g}: {specific:.2f} J/kg; stored {stored:.3f} J; system {system_specific:.3f} J/kg")
    print(f"quoted {q_stored:.2f} J -> system {q_system:.3f} J/kg")
    print(f"discrepancy: computed {d['computed_stored_J']:.2f} J vs quoted {d['quoted_stored_J']:.2f} J ({100 * d['relative_difference']:+.1f}%)")
    return {"curve": str(args.curve) if args.curve else "reference", "strain": args.strain, "band_mass": args.band_mass, "robot_mass": args.robot_mass}, paths


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--params", metavar="FILE", help="RobotParams JSON (default: prototype)")
    common.add_argument("--experimental", action="store_true", help="use the experimentally calibrated parameter set")
    common.add_argument("--out", metavar="DIR", default="hopdyn_out", help="output directory (env HOPDYN_OUT overrides)")
    common.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes for grid commands")
    common.add_argument("--dt", type=float, default=DT_AIR, metavar="SEC", help="aerial integration step")
    common.add_argument("--href", type=float, default=1.0, metavar="M", help="reference drop height")

    ap = _Parser(prog="hopdyn", description="Energy-accumulative hopping: simulation and analysis.")
    ap.add_argument("--version", action="version", version=f"hopdyn {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("params", parents=[common], help="print / validate a parameter record")
    s.add_argument("--default", action="store_true", help="print the prototype record")
    s.set_defaults(func=cmd_params)

    s = sub.add_parser("simulate", parents=[common], help="apex-height sequence under constant rebound thrust")
    s.add_argument("--alpha", type=float, default=0.4, help="rebound thrust / weight")
    s.add_argument("--h0", type=float, default=1.0, help="initial drop height (m)")
    s.add_argument("--hops", type=int, default=20)
    s.add_argument("--no-drag", action="store_true")
    s.add_argument("--trace", action="store_true", help="also write trajectory, events and ledger CSVs")
    s.add_argument("--sample-dt", type=float, default=1e-3, help="trace sampling period (s)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("critical", parents=[common], help="critical input ratio (single or surface)")
    s.add_argument("--single", action="store_true", help="only the given robot")
    s.add_argument("--resolution", type=int, default=20)
    s.add_argument("--mass-min", type=float)
    s.add_argument("--mass-max", type=float)
    s.add_argument("--frac-min", type=float, default=0.4)
    s.add_argument("--frac-max", type=float, default=0.95)
    s.set_defaults(func=cmd_critical)

    s = sub.add_parser("whatif", parents=[common], help="added-mass effect on the critical force")
    s.add_argument("--delta-m", type=float, default=0.1, help="added mass (kg)")
    s.set_defaults(func=cmd_whatif)

    s = sub.add_parser("stance", parents=[common], help="tilted-landing stance outcomes")
    s.add_argument("--v", type=float, help="single touchdown speed (m/s)")
    s.add_argument("--theta", type=float, help="single touchdown tilt (deg)")
    s.add_argument("--v-range", type=_floats, default=_floats("1:8:8"))
    s.add_argument("--theta-range", type=_floats, default=_floats("0:20:11"))
    s.add_argument("--stance-params", metavar="FILE", help="StanceParams JSON")
    s.set_defaults(func=cmd_stance)

    s = sub.add_parser("protocol", parents=[common], help="replay the experimental thrust protocol")
    s.add_argument("--config", metavar="FILE", help="ProtocolConfig JSON (overrides the flags below)")
    s.add_argument("--alpha-pct", type=float, default=0.0)
    s.add_argument("--blanking-ms", type=float, default=60.0)
    s.add_argument("--cutoff", type=float, default=1.0, help="input cutoff speed (m/s)")
    s.add_argument("--drop", type=float, default=1.5, help="drop height (m)")
    s.add_argument("--hops", type=int, default=10)
    s.set_defaults(func=cmd_protocol)

    s = sub.add_parser("analyze", parents=[common], help="energy ledgers from recorded t,x,y,z trajectories")
    s.add_argument("files", nargs="+")
    s.add_argument("--window", type=int, default=5, help="velocity smoothing window (samples)")
    s.add_argument("--fit-cda", action="store_true", help="also fit the drag-area line")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("elastomer", parents=[common], help="band elastic energy budget")
    s.add_argument("--curve", metavar="FILE", help="strain,stress_Pa CSV (default: reference curve)")
    s.add_argument("--density", type=float, help="band density (kg/m^3), required with --curve")
    s.add_argument("--strain", type=float, default=2.1)
    s.add_argument("--band-mass", type=float, default=BAND_MASS_TOTAL)
    s.add_argument("--robot-mass", type=float, default=ROBOT_MASS)
    s.set_defaults(func=cmd_elastomer)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.jobs < 1:
        print("hopdyn: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    out = Path(os.environ.get("HOPDYN_OUT") or args.out)
    start = time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
        config, outputs = args.func(args, out)
    except InputError as exc:
        print(f"hopdyn: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SimulationError, FloatingPointError, ArithmeticError) as exc:
        print(f"hopdyn: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"hopdyn: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    manifest = RunManifest(
        command=["hopdyn", *argv],
        config=config,
        outputs=sorted(str(Path(o).name) for o in outputs),
        wall_time=time.perf_counter() - start,
    )
    manifest.write(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
