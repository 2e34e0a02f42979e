"""Command line entry point: ``immtrack {simulate,track,eval,compare}``.

Exit codes: 0 success, 2 invalid input, 3 numerical-state failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import yaml

from .association import Metric
from .core_types import NumericalStateError, ValidationError
from .evaluation import evaluate
from .fileio import (
    load_config, load_map, load_scenario, read_detections, read_tracks, read_truth, report_json, scenario_factory,
    write_detections, write_tracks, write_truth,
)
from .pipeline import COMPARE_METRICS, compare, run_tracker
from .simulator import generate
from .track_manager import TrackerConfig

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("immtrack")


def _config(args) -> TrackerConfig:
    """Config file (or defaults) with ``--set key=value`` overrides applied."""
    data = {}
    if getattr(args, "config", None):
        data = load_config(args.config).to_dict()
    for item in getattr(args, "set", None) or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise ValidationError(f"--set expects key=value, got {item!r}")
        value = yaml.safe_load(raw)
        node = data
        *parents, leaf = key.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    cfg = TrackerConfig.from_dict(data)
    if getattr(args, "metric", None):
        cfg = cfg.for_metric(args.metric)
    return cfg


def cmd_simulate(args) -> int:
    if args.seed is None:
        scenario = load_scenario(args.scenario)
    else:
        scenario = scenario_factory(args.scenario)(args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    truth, frames = generate(scenario)
    write_truth(out / "truth.jsonl", truth)
    write_detections(out / "detections.jsonl", frames)
    if scenario.map is not None:
        (out / "map.yaml").write_text(yaml.safe_dump(scenario.map.to_dict(), sort_keys=False))
    print(f"wrote {len(frames)} frames to {out}")
    return EXIT_OK


def cmd_track(args) -> int:
    cfg = _config(args)
    frames = read_detections(args.detections)
    cmap = load_map(args.map) if args.map else None
    t0 = time.perf_counter()
    outputs, _ = run_tracker(frames, cfg, cmap)
    elapsed = time.perf_counter() - t0
    write_tracks(args.out, outputs)
    rate = len(frames) / elapsed if elapsed > 0 else float("inf")
    print(f"tracked {len(frames)} frames in {elapsed:.3f} s ({rate:.1f} frames/s)", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    report = evaluate(read_truth(args.truth), read_tracks(args.tracks), args.iou_threshold)
    print(report_json(report, iou_threshold=args.iou_threshold))
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config(args)
    factory = scenario_factory(args.scenario)
    seeds = list(range(args.first_seed, args.first_seed + args.seeds))
    metrics = [Metric(m) for m in args.metrics] if args.metrics else list(COMPARE_METRICS)
    result = compare(factory, cfg, seeds, metrics, args.iou_threshold)
    if args.json:
        data = {"seeds": seeds,
                "reports": {k: [r.to_dict() for r in v] for k, v in result.reports.items()}}
        print(json.dumps(data, indent=2, sort_keys=True))
    else:
        sys.stdout.write(result.format_table())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="immtrack", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    def config_flags(p):
        p.add_argument("--config", help="tracker config (YAML/JSON)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config entry, e.g. --set max_misses=4 or --set association.gate_radius=8")

    p = sub.add_parser("simulate", help="generate truth and detection streams from a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("track", help="run the tracker on a detection stream")
    p.add_argument("--detections", required=True, help="detections (.jsonl, or KITTI .txt)")
    config_flags(p)
    p.add_argument("--map", help="context map (YAML/JSON)")
    p.add_argument("--metric", choices=[m.value for m in Metric])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="CLEAR-MOT metrics of a track stream")
    p.add_argument("--truth", required=True, help="truth (.jsonl, or KITTI .txt)")
    p.add_argument("--tracks", required=True)
    p.add_argument("--iou-threshold", type=float, default=0.25)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="kf-iou vs imm-iou vs imm-posterior across seeds")
    p.add_argument("--scenario", required=True)
    config_flags(p)
    p.add_argument("--seeds", type=int, default=5, help="number of seeds")
    p.add_argument("--first-seed", type=int, default=0)
    p.add_argument("--metrics", nargs="+", choices=[m.value for m in Metric])
    p.add_argument("--iou-threshold", type=float, default=0.25)
    p.add_argument("--json", action="store_true", help="emit JSON instead of a table")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalStateError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
