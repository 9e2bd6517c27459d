"""Command-line entry points: measure, calibrate, synth, spool, report.

Exit codes: 0 success, 1 configuration or input error, 2 I/O error,
3 quality gate (defects found, or calibration residual too large).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .acquisition import PROJECTIONS, load_frame, load_rig_config, save_rig_config, scan_sequence
from .calibration import load_calibration, save_calibration
from .errors import (
    ConfigError,
    DegenerateSamples,
    EmptySequence,
    FileUnreadable,
    FilagaugeError,
    IoFailure,
    MaskTooSparse,
    RoiOutOfBounds,
    TooFewSamples,
)
from .measurement import (
    calibrate_rig,
    measure_paths,
    read_log_csv,
    write_defects_json,
    write_log_csv,
)
from .spool import SpoolSpec, layer_length, speed_schedule, total_length
from .synth import SynthScene, default_rig, profile_from_steps, render_sequence
from .texture import write_patch

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_GATE = 0, 1, 2, 3
MAX_CALIBRATION_RMS = 0.002  # mm/px

logger = logging.getLogger("filagauge")

_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO,
           "debug": logging.DEBUG}


def _setup_logging():
    name = os.environ.get("FILAGAUGE_LOG_LEVEL", "warn").lower()
    logging.basicConfig(level=_LEVELS.get(name, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if name not in _LEVELS:
        logger.warning("unknown FILAGAUGE_LOG_LEVEL %r, using warn", name)


def write_manifest(out_dir: Path, **paths) -> None:
    doc = {k: (None if v is None else str(Path(v).resolve())) for k, v in paths.items()}
    doc["tool_version"] = __version__
    doc["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    (out_dir / "manifest.json").write_text(json.dumps(doc, indent=2) + "\n")


def cmd_measure(args) -> int:
    try:
        rig = load_rig_config(args.config)
        calib = load_calibration(args.calibration)
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    try:
        paths = scan_sequence(args.input)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(out, config=args.config, input_dir=args.input, output_dir=out,
                       calibration=args.calibration)
        rig.check_frame(load_frame(paths[0]))
    except RoiOutOfBounds as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except (EmptySequence, FileUnreadable, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_IO

    log = measure_paths(paths, rig, calib, workers=max(1, args.workers),
                        with_patch=True)
    try:
        write_log_csv(log, out / "log.csv")
        write_defects_json(log, out / "defects.json")
        if args.patches:
            for fm in log.frames:
                if fm.patch is not None:
                    write_patch(fm.patch, out)
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_IO
    logger.info("%d frames, %d defect intervals", len(log.frames), len(log.defects))
    return EXIT_GATE if log.defects else EXIT_OK


def _parse_sample(spec: str):
    parts = spec.split(":")
    if len(parts) not in (2, 3):
        raise ConfigError(f"sample {spec!r} must be DIR:DIAMETER_MM[:DISTANCE_MM]")
    try:
        diameter = float(parts[1])
        distance = float(parts[2]) if len(parts) == 3 else None
    except ValueError as exc:
        raise ConfigError(f"sample {spec!r}: {exc}") from exc
    if not diameter > 0:
        raise ConfigError(f"sample {spec!r}: diameter must be positive")
    directory = Path(parts[0])
    if distance is None:
        gt = directory / "ground_truth.json"
        if gt.exists():
            frames = json.loads(gt.read_text())["frames"]
            distance = float(np.mean([f["distance_mm"] for f in frames]))
    return directory, diameter, distance


def cmd_calibrate(args) -> int:
    try:
        rig = load_rig_config(args.config)
        specs = [_parse_sample(s) for s in args.sample]
        if len(specs) < 2:
            raise TooFewSamples("need at least two sample sets")
    except FilagaugeError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    try:
        sets = []
        for directory, diameter, distance in specs:
            frames = [load_frame(p, index=i, period_s=rig.period_s)
                      for i, p in enumerate(scan_sequence(directory))]
            sets.append((frames, diameter, distance))
    except (EmptySequence, FileUnreadable, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_IO
    try:
        models = calibrate_rig(sets, rig)
    except (DegenerateSamples, TooFewSamples, MaskTooSparse, RoiOutOfBounds) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    try:
        save_calibration(models, args.out)
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_IO
    worst = max(m.residual_rms for m in models.values())
    print(f"calibration written to {args.out}; max residual RMS {worst:.6g} mm/px")
    if worst > MAX_CALIBRATION_RMS:
        logger.error("residual RMS %.6g mm/px exceeds %.3g", worst, MAX_CALIBRATION_RMS)
        return EXIT_GATE
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        doc = json.loads(Path(args.scene).read_text())
        steps = doc.pop("profile", None)
        scene = SynthScene.from_dict(doc)
        if args.seed is not None:
            scene = SynthScene.from_dict({**scene.to_dict(), "seed": args.seed})
        profile = profile_from_steps(steps, scene) if steps else None
        rig = default_rig(scene)
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_IO
    except (json.JSONDecodeError, FilagaugeError, KeyError, TypeError) as exc:
        logger.error("bad scene: %s", exc)
        return EXIT_CONFIG
    if args.count < 1:
        logger.error("count must be at least 1")
        return EXIT_CONFIG
    try:
        render_sequence(scene, args.count, args.out, profile)
        save_rig_config(rig, Path(args.out) / "rig.json")
    except IoFailure as exc:
        logger.error("%s", exc)
        return EXIT_IO
    except FilagaugeError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    return EXIT_OK


def cmd_spool(args) -> int:
    try:
        spec = SpoolSpec(args.R, args.n, args.m, args.d)
        sched = speed_schedule(spec, args.feed)
    except ValueError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    print(f"total length: {total_length(spec):.3f} mm")
    print("layer,length_mm,omega_rev_s,duration_s,switch_time_s")
    for k in range(1, spec.m + 1):
        print(f"{k},{layer_length(spec, k):.3f},{sched.omega_rev_s[k - 1]:.6f},"
              f"{sched.durations_s[k - 1]:.3f},{sched.switch_times_s[k - 1]:.3f}")
    return EXIT_OK


def _column(rows, key):
    return np.array([float(r[key]) for r in rows if r[key] != ""], dtype=np.float64)


def report_stats(rows, nominal: float, tol: float) -> dict[str, dict[str, float]]:
    stats = {}
    for p in (*PROJECTIONS, "mean"):
        v = _column(rows, f"d_{p}_mm")
        if v.size == 0:
            stats[p] = {"n": 0, "mean": math.nan, "std": math.nan, "min": math.nan,
                        "max": math.nan, "in_tolerance_pct": math.nan}
            continue
        stats[p] = {
            "n": int(v.size),
            "mean": float(v.mean()),
            "std": float(v.std(ddof=1)) if v.size > 1 else 0.0,
            "min": float(v.min()),
            "max": float(v.max()),
            "in_tolerance_pct": float(np.mean(np.abs(v - nominal) <= tol) * 100.0),
        }
    return stats


def cmd_report(args) -> int:
    try:
        rows = read_log_csv(args.log)
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_IO
    except (ValueError, csv.Error) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    if not rows:
        logger.error("%s: log has no frames", args.log)
        return EXIT_CONFIG
    nominal, tol = args.nominal, args.tolerance
    if args.config:
        try:
            rig = load_rig_config(args.config)
        except ConfigError as exc:
            logger.error("%s", exc)
            return EXIT_CONFIG
        nominal, tol = rig.nominal_diameter_mm, rig.tolerance_mm
    try:
        stats = report_stats(rows, nominal, tol)
    except ValueError as exc:
        logger.error("malformed log: %s", exc)
        return EXIT_CONFIG

    print(f"frames: {len(rows)}  nominal {nominal} mm  tolerance +-{tol} mm")
    print(f"{'projection':<10} {'n':>5} {'mean':>9} {'std':>9} {'min':>9} {'max':>9} {'in tol %':>9}")
    for p, s in stats.items():
        print(f"{p:<10} {s['n']:>5} {s['mean']:>9.4f} {s['std']:>9.4f} {s['min']:>9.4f} "
              f"{s['max']:>9.4f} {s['in_tolerance_pct']:>9.1f}")
    ov = _column(rows, "ovality_pct")
    if ov.size:
        print(f"ovality %: mean {ov.mean():.3f}  max {ov.max():.3f}")

    out = Path(args.out) if args.out else Path(args.log).parent
    out.mkdir(parents=True, exist_ok=True)
    data = {p: _column(rows, f"d_{p}_mm") for p in PROJECTIONS}
    allv = np.concatenate([v for v in data.values()] + [np.array([nominal - tol, nominal + tol])])
    edges = np.linspace(allv.min(), allv.max(), args.bins + 1)
    hist = {p: np.histogram(v, bins=edges)[0] for p, v in data.items()}
    with open(out / "histogram.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo_mm", "bin_hi_mm", *PROJECTIONS])
        for i in range(args.bins):
            w.writerow([f"{edges[i]:.6f}", f"{edges[i + 1]:.6f}", *(int(hist[p][i]) for p in PROJECTIONS)])
    if args.svg:
        _plot_svg(data, edges, nominal, tol, out)
    return EXIT_OK


def _plot_svg(data, edges, nominal, tol, out: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for p, v in data.items():
        ax.hist(v, bins=edges, histtype="step", label=p)
    for x in (nominal - tol, nominal + tol):
        ax.axvline(x, ls="--", c="k", lw=0.8)
    ax.set_xlabel("diameter, mm")
    ax.set_ylabel("frames")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "histogram.svg")
    plt.close(fig)


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors, not argparse's default status 2 (reserved for I/O)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="filagauge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measure", help="measure a frame sequence")
    p.add_argument("--config", required=True)
    p.add_argument("--calibration", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--patches", action="store_true", help="dump patch_<frame>.pgm files")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("calibrate", help="fit per-projection calibration lines")
    p.add_argument("--config", required=True)
    p.add_argument("--sample", action="append", default=[], metavar="DIR:DIAMETER[:DISTANCE]")
    p.add_argument("--out", required=True, help="calibration JSON to write")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("synth", help="render a synthetic frame sequence")
    p.add_argument("scene", help="scene JSON")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("spool", help="spool length and winding schedule")
    p.add_argument("R", type=float, help="spool radius, mm")
    p.add_argument("n", type=int, help="diameters across the spool width")
    p.add_argument("m", type=int, help="number of layers")
    p.add_argument("d", type=float, help="filament diameter, mm")
    p.add_argument("--feed", type=float, default=10.0, help="feed rate, mm/s")
    p.set_defaults(func=cmd_spool)

    p = sub.add_parser("report", help="summary statistics of a measurement log")
    p.add_argument("log")
    p.add_argument("--config", default=None, help="take nominal and tolerance from a rig config")
    p.add_argument("--nominal", type=float, default=1.75)
    p.add_argument("--tolerance", type=float, default=0.05)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--out", default=None, help="directory for histogram files")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
