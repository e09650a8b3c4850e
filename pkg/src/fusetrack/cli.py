"""Command line entry point: ``fusetrack {simulate,train-dan,run,eval,report}``.

Exit codes: 0 success, 1 other package error, 2 bad configuration or usage,
3 unreadable input file, 4 evaluation mismatch, 5 missing file.
Set FUSETRACK_LOG to DEBUG/INFO/WARNING/ERROR for log verbosity.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .affinity import load_model, save_model, write_loss_curve
from .config import dump_config, load_config
from .errors import ConfigError, FuseTrackError
from .evaluation import MetricReport, depth_table, ranging_table
from .jsonl import load_frames, load_gt, load_tracks, save_frames, save_gt, save_tracks
from .pipeline import build_scorer, evaluate_run, run_pipeline, train_dan
from .scenario import generate_scenario, make_dan_dataset

logger = logging.getLogger("fusetrack")

EXIT_MISSING_FILE = 5


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, command, config, outputs, **extra):
    """Record what produced ``outputs``: command, seed, config hash and output hashes."""
    data = {
        "command": command,
        "version": __version__,
        "seed": config.scenario.seed if command == "simulate" else config.run.dan_seed,
        "config_sha256": config.digest(),
        "outputs": {Path(p).name: _sha256(p) for p in outputs},
    }
    data.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return data


def _config(args, seed_key=None):
    overrides = list(args.set or [])
    if seed_key and getattr(args, "seed", None) is not None:
        overrides.append(f"{seed_key}={args.seed}")
    for flag, key, value in (
        ("no_radar", "run.use_radar", "false"),
        ("no_dca", "run.dca", "false"),
    ):
        if getattr(args, flag, False):
            overrides.append(f"{key}={value}")
    if getattr(args, "scorer", None):
        overrides.append(f"run.scorer={args.scorer}")
    if getattr(args, "loss", None):
        overrides.append(f"run.dan_loss={args.loss}")
    if args.config is not None and not Path(args.config).exists():
        raise ConfigError(f"config file not found: {args.config}")
    return load_config(args.config, overrides)


def cmd_simulate(args):
    config = _config(args, "scenario.seed")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scenario = generate_scenario(config)
    save_frames(scenario.frames, out / "frames.jsonl")
    save_gt(scenario.gt, out / "gt.jsonl")
    dump_config(config, out / "config.yaml")
    write_manifest(out / "manifest.json", "simulate", config,
                   [out / "frames.jsonl", out / "gt.jsonl", out / "config.yaml"],
                   frames=len(scenario.frames))
    logger.info("wrote %d frames to %s", len(scenario.frames), out)


def cmd_train_dan(args):
    config = _config(args, "run.dan_seed")
    frames = load_frames(args.frames, strict=args.strict)
    gt = load_gt(args.gt)
    if len(frames) != len(gt):
        raise ConfigError(f"{args.frames} has {len(frames)} frames but {args.gt} has {len(gt)}")
    run = config.run
    dataset = make_dan_dataset(frames, gt, config.camera.model(), run.weights, inter_frame=run.dan_inter_frame)
    model = train_dan(dataset, run)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    curve = out.with_suffix(".loss.csv")
    write_loss_curve(model, curve)
    write_manifest(out.with_suffix(".manifest.json"), "train-dan", config, [out, curve],
                   loss=run.dan_loss, matrices=len(dataset))
    logger.info("trained %s-loss DAN on %d matrices -> %s", run.dan_loss, len(dataset), out)


def cmd_run(args):
    config = _config(args)
    run = config.run
    model = None
    if args.model is not None:
        model = load_model(args.model)
        if args.scorer is None:
            run.scorer = "dan"
    elif run.scorer == "dan":
        raise ConfigError("scorer 'dan' needs --model")
    frames = load_frames(args.frames, strict=args.strict)
    result = run_pipeline(frames, config.camera.model(), run, build_scorer(run, model))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_tracks(result.records, out)
    write_manifest(out.with_suffix(".manifest.json"), "run", config, [out],
                   frames=result.frames, local_pairs=result.local_pairs, global_pairs=result.global_pairs,
                   model=None if args.model is None else _sha256(args.model))


def cmd_eval(args):
    config = _config(args)
    records = load_tracks(args.tracks)
    gt = load_gt(args.gt)
    name = args.name or Path(args.tracks).stem
    if not records:
        logger.warning("%s holds no track records; writing an empty report", args.tracks)
        report = MetricReport(name=name)
    else:
        report = evaluate_run(records, gt, config.run, name)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "report.txt").write_text(ranging_table([report]) + "\n" + depth_table([report]), encoding="utf-8")


def write_comparison(reports, out):
    """Comparison tables (text + CSV) and histogram data with a gnuplot script."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.txt").write_text(ranging_table(reports) + "\n" + depth_table(reports), encoding="utf-8")

    bins = []
    for r in reports:
        bins += [b for b in r.bins if b not in bins]
    bins.sort(key=lambda s: float(s.split("-")[0]))
    depth_keys = ["delta1", "delta2", "delta3", "abs_rel", "squa_rel", "rmse", "rmse_log"]
    with open(out / "comparison.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["name"] + bins + ["car", "cipv"] + depth_keys)
        for r in reports:
            cells = [r.bins.get(b) for b in bins] + [r.car_average, r.cipv] + [r.depth.get(k) for k in depth_keys]
            writer.writerow([r.name] + ["" if v is None else repr(float(v)) for v in cells])

    edges = []
    for r in reports:
        edges += [e for e in r.distance_histogram if e not in edges]
    edges.sort(key=lambda s: float(s.split("-")[0]))
    with open(out / "histogram.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_lo", "bin_hi"] + [r.name for r in reports])
        for e in edges:
            lo, hi = e.split("-")
            writer.writerow([lo, hi] + [r.distance_histogram.get(e, 0) for r in reports])
    plots = ["set datafile separator ','", "set style data histograms", "set style fill solid 0.6",
             "set key autotitle columnhead", "set xlabel 'ground-truth distance (m)'", "set ylabel 'objects'",
             "set terminal pngcairo size 900,500", "set output 'histogram.png'",
             "plot " + ", ".join(f"'histogram.csv' using {i + 3}:xtic(1)" for i in range(len(reports)))]
    (out / "histogram.gp").write_text("\n".join(plots) + "\n", encoding="utf-8")


def cmd_report(args):
    reports = []
    for path in args.reports:
        with open(path, encoding="utf-8") as fh:
            reports.append(MetricReport.from_dict(json.load(fh)))
    write_comparison(reports, args.out)
    sys.stdout.write(ranging_table(reports))


def build_parser():
    parser = argparse.ArgumentParser(prog="fusetrack", description="Camera/radar cascaded fusion and ranging.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML config (defaults when omitted)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override, repeatable")

    p = sub.add_parser("simulate", help="generate a synthetic scenario")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train-dan", help="train the deep affinity network")
    common(p)
    p.add_argument("--frames", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--loss", choices=("mask", "affinity"))
    p.add_argument("--seed", type=int)
    p.add_argument("--strict", action="store_true", help="reject unknown fields in frame files")
    p.add_argument("--out", required=True, help="model file")
    p.set_defaults(func=cmd_train_dan)

    p = sub.add_parser("run", help="fuse and track a frame file")
    common(p)
    p.add_argument("--frames", required=True)
    p.add_argument("--model")
    p.add_argument("--scorer", choices=("artificial", "dan"))
    p.add_argument("--no-radar", action="store_true")
    p.add_argument("--no-dca", action="store_true")
    p.add_argument("--strict", action="store_true", help="reject unknown fields in frame files")
    p.add_argument("--out", required=True, help="track JSONL")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score tracks against ground truth")
    common(p)
    p.add_argument("--tracks", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--name")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="compare metric reports")
    p.add_argument("reports", nargs="+", help="report.json files")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)
    return parser


def _setup_logging():
    level = os.environ.get("FUSETRACK_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except FuseTrackError as exc:
        print(f"fusetrack {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"fusetrack {args.command}: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_MISSING_FILE
    return 0


if __name__ == "__main__":
    sys.exit(main())
