"""Command line entry point: ``bubbletrace <subcommand> [--config --out --seed --resolution]``."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .experiments import ExperimentConfig, run
from .plots import emit_plots

SUBCOMMANDS = {
    "constants": "constants",
    "kirchhoff": "kirchhoff-check",
    "evolve": "radiation-evolve",
    "bubble-track": "bubble-track",
    "reduced-rates": "reduced-rates",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="bubbletrace", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(SUBCOMMANDS) + ["plots"]:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="seed for randomized sweeps")
        p.add_argument("--resolution", choices=("low", "default", "high"))
    return parser


def load_config(args, experiment):
    d = {"experiment": experiment}
    if args.config:
        with open(args.config) as fh:
            d = json.load(fh)
        d["experiment"] = experiment
    if args.out:
        d["output_dir"] = args.out
    if args.seed is not None:
        d["seed"] = args.seed
    if args.resolution:
        d["resolution"] = args.resolution
    return ExperimentConfig.from_dict(d)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "plots":
        out = args.out or "out"
        if not os.path.isdir(out):
            print(f"no such output directory: {out}", file=sys.stderr)
            return 1
        written, missing = emit_plots(out)
        for w in written:
            print(f"wrote {os.path.join(out, w)}")
        for m in missing:
            print(f"missing input {m} (skipped)")
        return 0
    try:
        config = load_config(args, SUBCOMMANDS[args.command])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    os.makedirs(config.output_dir, exist_ok=True)
    with open(os.path.join(config.output_dir, f"config_{config.experiment}.json"), "w") as fh:
        fh.write(config.to_json())
    try:
        report = run(config)
    except ValueError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    for c in report.checks:
        print(c.line())
    print(f"{'all checks passed' if report.passed else 'some checks FAILED'} ({config.experiment}, config {report.config_hash})")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
