"""Command-line entry point.

Exit codes: 0 success, 2 solver did not converge, 3 configuration or
usage error (any other module error also exits with 3).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, LaplineError, NotConverged

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_CONFIG = 0, 2, 3
PLANNED_VARIANTS = ("nom", "tlc", "flc")

log = logging.getLogger("robust_lapline")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _versions() -> dict:
    import casadi
    import scipy
    return {"robust_lapline": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "casadi": casadi.__version__}


@dataclass
class RunManifest:
    command: str
    argv: list
    config_hash: str
    seed: int | None
    versions: dict
    started: str
    finished: str = ""
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    status: str = "ok"

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _input_hashes(*paths) -> dict:
    return {str(p): sha256_file(p) for p in paths if p is not None and Path(p).exists()}


def _config_hash(inputs: dict, extra: dict) -> str:
    h = hashlib.sha256(json.dumps({"inputs": inputs, "extra": extra}, sort_keys=True).encode())
    return h.hexdigest()


def _finish(manifest: RunManifest, out_dir: Path, outputs: dict, status="ok") -> None:
    manifest.outputs = {k: {"path": str(v), "sha256": sha256_file(v)} for k, v in outputs.items()}
    manifest.status = status
    manifest.finished = _now()
    manifest.write(out_dir / f"{manifest.command}_manifest.json")


# ------------------------------------------------------------------ plan

def _scene_with_flags(args):
    from .backoff import BackoffConfig
    from .config import load_scene

    scene = load_scene(args.scene)
    bo = scene.backoff
    gamma = bo.gamma
    p = dict(bo.p)
    if getattr(args, "p", None) is not None:
        p = {"TLC": args.p, "FLC": args.p}
        gamma = None if args.gamma is None else gamma
    if getattr(args, "gamma", None) is not None:
        gamma = args.gamma
    variant = getattr(args, "variant", None) or bo.variant
    changes = {"backoff": BackoffConfig(variant=variant, p=p, gamma=gamma)}
    if getattr(args, "horizon", None) is not None:
        if args.horizon < 1:
            raise ConfigError("--horizon must be at least 1")
        changes["horizon"] = args.horizon
    if getattr(args, "grid_n", None) is not None:
        changes["N"] = args.grid_n
    return scene.with_(**changes)


def _plan_summary(plan) -> dict:
    st = plan.stats
    return {
        "variant": plan.variant, "lap_time": round(plan.lap_time, 9),
        "iterations": st.iterations, "status": st.status,
        "kkt_residual": float(f"{st.kkt_residual:.6e}"),
        "constraint_violation": float(f"{st.constraint_violation:.6e}"),
        "sweeps": plan.sweeps, "fixed_point_converged": plan.fixed_point_converged,
        "steer_weight": plan.steer_weight,
        "cost_parts": {k: round(v, 9) for k, v in plan.cost_parts.items()},
        "slack_mass": float(f"{plan.slack_mass:.6e}"),
    }


def cmd_plan(args) -> int:
    from .planner.export import export_reference, plan_variant
    from .planner.solve import write_solver_log

    variant = args.variant.lower()
    if variant == "noref":
        raise UsageError("NOREF means driving without a reference; there is nothing to plan")
    if variant not in PLANNED_VARIANTS:
        raise UsageError(f"--variant must be one of {', '.join(PLANNED_VARIANTS)}")
    args.variant = variant
    scene = _scene_with_flags(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = _input_hashes(args.scene)
    manifest = RunManifest("plan", list(args.argv), scene.digest(), None, _versions(), _now(),
                           inputs=inputs)
    status, code = "ok", EXIT_OK
    try:
        plan = plan_variant(variant.upper(), scene)
    except NotConverged as exc:
        if exc.result is None:
            raise
        plan, status, code = exc.result, "not_converged", EXIT_NOT_CONVERGED
        log.error("%s", exc)
    paths = export_reference(plan, scene.track, out, variant, scene.driver_offset)
    summary = out / f"{variant}_plan.json"
    summary.write_text(json.dumps(_plan_summary(plan), indent=2, sort_keys=True) + "\n",
                       encoding="utf-8")
    solver_log = out / f"{variant}_solver.log"
    write_solver_log(solver_log, plan.stats)
    paths.update(summary=summary, solver_log=solver_log)
    _finish(manifest, out, paths, status)
    print(f"{variant.upper()} lap time {plan.lap_time:.4f} s ({plan.stats.status}, "
          f"{plan.sweeps} sweeps)")
    return code


# ------------------------------------------------------------------ fit

def cmd_fit(args) -> int:
    from .config import load_tire
    from .telemetry import read_telemetry
    from .tirefit import assemble_training, fit_axle, write_fit_report

    start = load_tire(args.start, args.axle)
    train = assemble_training(read_telemetry(args.telemetry), args.axle)
    fixed = tuple(args.fix or ())
    report = fit_axle(train, start, fixed=fixed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"fit_{args.axle}.txt"
    write_fit_report(path, report, args.axle)
    inputs = _input_hashes(args.telemetry, args.start)
    manifest = RunManifest("fit", list(args.argv), _config_hash(inputs, {"fixed": fixed}),
                           None, _versions(), _now(), inputs=inputs)
    _finish(manifest, out, {"report": path}, "ok" if report.converged else "not_converged")
    print(f"{args.axle} axle: residual rms {report.residual_rms:.4g} N after "
          f"{report.iterations} iterations (converged={report.converged})")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


# ------------------------------------------------------------------ validate

def cmd_validate(args) -> int:
    from .montecarlo import validate, write_validation
    from .reference import read_reference

    scene = _scene_with_flags(args)
    ref = read_reference(args.plan, closed=scene.track.closed)
    rows = validate(ref, scene.track, scene.car, scene.noise, scene.horizon, args.samples,
                    args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.plan).stem
    path = out / f"{stem}_validation.csv"
    write_validation(path, rows)
    inputs = _input_hashes(args.plan, args.scene)
    manifest = RunManifest("validate", list(args.argv),
                           _config_hash(inputs, {"M": args.samples, "H": scene.horizon,
                                                 "digest": scene.digest()}),
                           args.seed, _versions(), _now(), inputs=inputs)
    _finish(manifest, out, {"validation": path})
    for r in rows:
        print(f"{r.family} node {r.k}: {r.violations}/{r.M} = {100 * r.rate:.3f}% "
              f"[{100 * r.ci_low:.3f}, {100 * r.ci_high:.3f}]")
    return EXIT_OK


# ------------------------------------------------------------------ metrics

def cmd_metrics(args) -> int:
    from .metrics import (lap_metrics, lap_split, markdown_table, resample_reference,
                          summarize, write_lap_metrics)
    from .reference import read_reference
    from .telemetry import read_telemetry

    scene = _scene_with_flags(args)
    tel = read_telemetry(args.telemetry)
    laps = lap_split(tel, scene.track)
    path = None
    if args.reference:
        ref = read_reference(args.reference, closed=scene.track.closed)
        offset = scene.driver_offset if scene.ey_frame == "ribbon" else 0.0
        path = resample_reference(ref, offset=offset)
    rows = [(i, lap_metrics(lap, path)) for i, lap in enumerate(laps)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.telemetry).stem
    per_lap = out / f"{stem}_laps.csv"
    write_lap_metrics(per_lap, rows)
    records = [dict(asdict(m), driver=args.driver, condition=args.condition) for _, m in rows]
    md = [markdown_table(summarize(records, "LT"), "Lap time [s]"),
          markdown_table(summarize(records, "E_s", digits=4), "Steer energy [rad^2/s]")]
    for name in ("rms_ey", "rms_ev", "rms_beta_drv", "rms_beta_ref", "rms_delta_rate"):
        if all(np.isfinite(r[name]) for r in records):
            md.append(markdown_table(summarize(records, name, digits=3), name))
    summary = out / f"{stem}_summary.md"
    summary.write_text("\n".join(md), encoding="utf-8")
    inputs = _input_hashes(args.telemetry, args.reference, args.scene)
    manifest = RunManifest("metrics", list(args.argv), _config_hash(inputs, {}), None,
                           _versions(), _now(), inputs=inputs)
    _finish(manifest, out, {"laps": per_lap, "summary": summary})
    print(f"{len(laps)} complete laps")
    return EXIT_OK


# ------------------------------------------------------------------ probe

def cmd_probe(args) -> int:
    from .montecarlo import tuning_probe

    scene = _scene_with_flags(args)
    rep = tuning_probe(scene.car, scene.noise, scene.horizon, config=scene.backoff.__class__(
        "FLC", p=scene.backoff.p, gamma=scene.backoff.gamma))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "probe.json"
    path.write_text(json.dumps(asdict(rep), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    inputs = _input_hashes(args.scene)
    manifest = RunManifest("probe", list(args.argv), scene.digest(), None, _versions(), _now(),
                           inputs=inputs)
    _finish(manifest, out, {"probe": path})
    print(f"max FLC back-off {rep.max_beta:.4f} (axle {rep.max_beta_axle}), "
          f"peak saturation {rep.peak_saturation:.3f}")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="robust-lapline", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scene_flags(p, variant=False):
        p.add_argument("--scene", required=True, help="scene TOML file")
        if variant:
            p.add_argument("--variant", required=True, help="nom, tlc or flc")
        p.add_argument("--gamma", type=float, help="sigma multiplier (overrides --p)")
        p.add_argument("--p", type=float, help="satisfaction probability")
        p.add_argument("--horizon", type=int, help="replica horizon H")
        p.add_argument("--grid-n", dest="grid_n", type=int, help="number of grid intervals")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("plan", help="plan one variant and export reference files")
    scene_flags(p, variant=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("fit", help="identify one axle's tire parameters")
    p.add_argument("--telemetry", required=True)
    p.add_argument("--axle", required=True, choices=("front", "rear"))
    p.add_argument("--start", required=True, help="TOML with the starting parameters")
    p.add_argument("--fix", action="append", help="parameter held at its start value")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("validate", help="Monte Carlo check of a plan's constraint margins")
    p.add_argument("--plan", required=True, help="reference CSV written by 'plan'")
    scene_flags(p)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("metrics", help="score executed laps")
    p.add_argument("--telemetry", required=True)
    p.add_argument("--reference", help="reference CSV (omit for free driving)")
    scene_flags(p)
    p.add_argument("--driver", default="driver")
    p.add_argument("--condition", default="run")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("probe", help="noise tuning probe")
    scene_flags(p)
    p.set_defaults(func=cmd_probe)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.argv = argv
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotConverged as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except LaplineError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
