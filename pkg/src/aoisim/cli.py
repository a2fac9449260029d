"""Command-line front end: run one replication, sweep a parameter, or fit
a GPD to a CSV column of excess values."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .config import SimConfig, load_config, with_overrides
from .evt import FitError, fit_gpd
from .simulator import run, summary_json, sweep, write_outputs


def _add_run_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--slots", type=int)
    parser.add_argument("--policy",
                        choices=["proposed", "baseline2", "fixed"])
    parser.add_argument("--arrival", choices=["deterministic", "poisson"])
    parser.add_argument("--rate-model", choices=["shannon", "fbl"])
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--trace", action="store_true",
                        help="also write the per-slot trace.csv")


def _build_cfg(args) -> SimConfig:
    cfg = load_config(args.config) if args.config else SimConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.slots is not None:
        overrides["slots"] = args.slots
    if args.policy is not None:
        overrides["policy"] = ("fixed_power" if args.policy == "fixed"
                               else args.policy)
    if args.arrival is not None:
        overrides["arrival_model"] = args.arrival
    if args.rate_model is not None:
        overrides["rate_model"] = args.rate_model
    return with_overrides(cfg, **overrides) if overrides else cfg


def _cmd_run(args) -> int:
    cfg = _build_cfg(args)
    report = run(cfg)
    write_outputs(report, args.out, trace=args.trace)
    sys.stdout.write(summary_json(report))
    return 0


def _cmd_sweep(args) -> int:
    cfg = _build_cfg(args)
    values = [float(v) for v in args.values]
    if args.param == "blocklength":
        values = [int(v) for v in values]
    reports = sweep(cfg, args.param, values)
    args.out.mkdir(parents=True, exist_ok=True)
    rows = []
    for value, report in zip(values, reports):
        point_dir = args.out / f"{args.param}={value:g}"
        write_outputs(report, point_dir, trace=args.trace)
        entry = report.summary()
        entry[args.param] = value
        rows.append(entry)
    (args.out / "sweep.json").write_text(
        json.dumps(rows, sort_keys=True, indent=2) + "\n")
    sys.stdout.write(json.dumps(rows, sort_keys=True, indent=2) + "\n")
    return 0


def _cmd_fit_gpd(args) -> int:
    with args.input.open(newline="") as fh:
        reader = csv.reader(fh)
        values = []
        for row in reader:
            if not row:
                continue
            try:
                values.append(float(row[args.column]))
            except (ValueError, IndexError):
                continue  # header or ragged row
    try:
        params, diag = fit_gpd(values)
    except FitError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    out = {"sigma": params.sigma, "xi": params.xi,
           "loglik": diag["loglik"], "ks": diag["ks"], "n": diag["n"]}
    sys.stdout.write(json.dumps(out, sort_keys=True, indent=2) + "\n")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="aoisim",
        description="Age-of-information tail control simulator for V2V links")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one seeded replication")
    _add_run_overrides(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="independent runs over a parameter")
    _add_run_overrides(p_sweep)
    p_sweep.add_argument("--param", required=True,
                         choices=["v", "arrival_rate", "blocklength",
                                  "block_error"])
    p_sweep.add_argument("--values", required=True, nargs="+")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_fit = sub.add_parser("fit-gpd", help="fit a GPD to a CSV column")
    p_fit.add_argument("--input", type=Path, required=True)
    p_fit.add_argument("--column", type=int, default=0)
    p_fit.set_defaults(func=_cmd_fit_gpd)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
