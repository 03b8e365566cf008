"""Command-line driver: synthesize, calibrate, analyze, reliability.

Exit codes: 0 ok, 2 bad input or validation failure, 3 finished with a
warning (chair moved), 4 tracking failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import Config, load_config
from .errors import NeckflexError, TrackLostError
from .frameio import atomic_write_bytes, read_session, write_session
from .kinematics import KinematicReport
from .pipeline import Calibration, analyze, calibrate
from .reliability import reliability_report
from .synth import SYNTH_DETECT_PARAMS, generate_motion, render_session

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_WARNING = 3
EXIT_TRACK_LOST = 4


def _dump_json(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _write_json(path: Path, obj) -> None:
    atomic_write_bytes(path, _dump_json(obj))


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise NeckflexError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise NeckflexError(f"{path}: invalid JSON: {exc}") from None


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synthesize(args, cfg: Config) -> int:
    profile = cfg.synth
    if args.seed is not None:
        profile = replace(profile, seed=args.seed)
    out = _out_dir(args)
    motion = replace(profile, trial_kind="motion")
    static = replace(profile, trial_kind="static")
    for name, prof in (("static", static), ("motion", motion)):
        truth = generate_motion(prof)
        write_session(render_session(truth, cfg.camera, cfg.offset), out / name)
        if name == "motion":
            _write_json(out / "truth.json", truth.to_dict())
    # a config the other subcommands can use on these bundles as-is
    run_cfg = replace(cfg, detect=SYNTH_DETECT_PARAMS, synth=profile)
    _write_json(out / "config.json", run_cfg.to_dict())
    print(f"wrote {out / 'static'}, {out / 'motion'}, truth.json and config.json")
    return EXIT_OK


def cmd_calibrate(args, cfg: Config) -> int:
    bundle = read_session(args.bundle, lazy=True)
    if bundle.manifest.trial_kind != "static":
        print(f"error: {args.bundle} is a {bundle.manifest.trial_kind!r} trial; "
              "calibration needs a static trial", file=sys.stderr)
        return EXIT_INPUT
    cal = calibrate(bundle, cfg.camera, cfg.detect, cfg.track.gate_px)
    out = _out_dir(args)
    _write_json(out / "calibration.json", cal.to_dict())
    print(f"wrote {out / 'calibration.json'}")
    return EXIT_OK


def cmd_analyze(args, cfg: Config) -> int:
    cal = Calibration.from_dict(_read_json(args.calibration))
    bundle = read_session(args.bundle, lazy=True)
    report, _ = analyze(bundle, cal, cfg.camera, cfg.detect, cfg.track, cfg.kinematics)
    out = _out_dir(args)
    _write_json(out / "report.json", report.to_dict())
    atomic_write_bytes(out / "series.csv", report.series.to_csv().encode("utf-8"))
    print(f"ROM {report.rom:.2f} deg, max {report.max_angle:.2f} deg, "
          f"mean omega {report.mean_omega:.3f} deg/s, harmony {report.harmony:.4f}")
    if not report.chair_ok:
        print("warning: the chair marker moved beyond "
              f"{cfg.kinematics.chair_threshold_cm} cm; results may be unreliable", file=sys.stderr)
        return EXIT_WARNING
    return EXIT_OK


def cmd_reliability(args, cfg: Config) -> int:
    if len(args.reports) < 2:
        print("error: reliability needs at least two report files", file=sys.stderr)
        return EXIT_INPUT
    reports = [KinematicReport.from_dict(_read_json(p)) for p in args.reports]
    subjects = sorted({r.subject_id for r in reports})
    if len(subjects) > 1:
        print(f"error: reports come from different subjects: {', '.join(subjects)}", file=sys.stderr)
        return EXIT_INPUT
    rel = reliability_report(reports, n=cfg.n_norm)
    out = _out_dir(args)
    _write_json(out / "reliability.json", rel.to_dict())
    table = rel.to_table()
    atomic_write_bytes(out / "reliability.txt", table.encode("utf-8"))
    print(table, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="neckflex", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", default=".", help="output directory (default: .)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize", parents=[common], help="render static and motion bundles with ground truth")
    p.add_argument("--seed", type=int, help="override synth.seed")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("calibrate", parents=[common], help="offset and reference frame from a static trial")
    p.add_argument("bundle", help="static session bundle directory")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("analyze", parents=[common], help="kinematic report for a motion session")
    p.add_argument("bundle", help="motion session bundle directory")
    p.add_argument("calibration", help="calibration.json from the calibrate step")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("reliability", parents=[common], help="SEM, CMC and Pearson across sessions")
    p.add_argument("reports", nargs="*", help="report.json files of one subject")
    p.set_defaults(func=cmd_reliability)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except TrackLostError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRACK_LOST
    except (NeckflexError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
