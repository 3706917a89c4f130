"""Command line entry points: run, sweep, report."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from .bench import emit_outputs, run_scenario
from .config import PLANNERS, builtin_config, config_from_dict, load_config
from .errors import ConfigError


def _load(args):
    if getattr(args, "from_manifest", None):
        with open(args.from_manifest) as fh:
            manifest = json.load(fh)
        cfg = config_from_dict(manifest["config"])
    elif args.builtin:
        cfg = builtin_config(args.builtin)
    elif args.config:
        cfg = load_config(args.config)
    else:
        raise ConfigError("<cli>", "one of --config/--builtin/--from-manifest "
                          "is required")
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "planner", None) is not None:
        cfg = replace(cfg, planner=args.planner)
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    result = run_scenario(cfg)
    paths = emit_outputs(result, args.outdir)
    print(f"scenario {cfg.name!r} planner={cfg.planner} seed={cfg.seed}")
    print(f"mean prediction error: {result.overall_mean_error:.4f} m")
    print(f"messages: {result.ledger.query()['messages']} "
          f"({result.ledger.query()['bytes']} bytes)")
    for name, p in paths.items():
        print(f"  {name}: {p}")
    return 0


def _parse_seeds(text):
    if ":" in text:
        a, b = text.split(":")
        return list(range(int(a), int(b)))
    return [int(s) for s in text.split(",") if s]


def cmd_sweep(args) -> int:
    cfg = _load(args)
    seeds = _parse_seeds(args.seeds)
    planners = [p.strip() for p in args.planners.split(",") if p.strip()]
    for p in planners:
        if p not in PLANNERS:
            raise ConfigError("planners", f"unknown planner {p!r}")
    os.makedirs(args.outdir, exist_ok=True)
    summary_path = os.path.join(args.outdir, "sweep_summary.csv")
    with open(summary_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["planner", "seed", "mean_error"])
        for p in planners:
            for s in seeds:
                run_cfg = replace(cfg, seed=s, planner=p)
                result = run_scenario(run_cfg)
                sub = os.path.join(args.outdir, f"{p}_seed{s}")
                emit_outputs(result, sub)
                w.writerow([p, s, repr(result.overall_mean_error)])
                print(f"{p:>14} seed={s:<3} mean_error="
                      f"{result.overall_mean_error:.4f}")
    print(f"summary: {summary_path}")
    return 0


def cmd_report(args) -> int:
    summary_path = os.path.join(args.outdir, "sweep_summary.csv")
    rows = []
    with open(summary_path) as fh:
        for rec in csv.DictReader(fh):
            rows.append((rec["planner"], int(rec["seed"]),
                         float(rec["mean_error"])))
    if not rows:
        print("no sweep rows found", file=sys.stderr)
        return 1
    planners = sorted({r[0] for r in rows})
    report_path = os.path.join(args.outdir, "report.csv")
    with open(report_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["planner", "runs", "mean_error", "std_error"])
        print(f"{'planner':>14} {'runs':>5} {'mean':>9} {'std':>9}")
        for p in planners:
            vals = np.array([r[2] for r in rows if r[0] == p])
            w.writerow([p, len(vals), repr(float(vals.mean())),
                        repr(float(vals.std()))])
            print(f"{p:>14} {len(vals):>5} {vals.mean():>9.4f} "
                  f"{vals.std():>9.4f}")
    print(f"report: {report_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resin",
        description="Multi-sensor target tracking: decentralized GP learning, "
                    "fusion, and planning benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="path to a scenario JSON file")
        p.add_argument("--builtin", help="name of a shipped config "
                       "(stationary_fusion, mobile_planning)")
        p.add_argument("--outdir", default="out", help="output directory")

    p_run = sub.add_parser("run", help="run one scenario")
    add_common(p_run)
    p_run.add_argument("--from-manifest", help="re-run from a manifest.json")
    p_run.add_argument("--seed", type=int, help="override the config seed")
    p_run.add_argument("--planner", choices=PLANNERS,
                       help="override the config planner")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="seed x planner grid")
    add_common(p_sweep)
    p_sweep.add_argument("--seeds", default="0:10",
                         help="range a:b or comma list")
    p_sweep.add_argument("--planners", default="resin",
                         help="comma-separated planner names")
    p_sweep.set_defaults(func=cmd_sweep)

    p_rep = sub.add_parser("report", help="aggregate a sweep directory")
    p_rep.add_argument("--outdir", default="out")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
