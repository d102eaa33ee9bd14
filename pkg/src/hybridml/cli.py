"""Command-line entry point: ``hybridml <command> [--config PATH] [--seed N] [--out DIR]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, default_config_text, load_config
from .pipeline import OutputDir, PipelineError, describe, planned_stages, run_stages
from .plots import render_all

COMMANDS = {
    "ingest": "load, impute and split the dataset",
    "train": "train the four learners and save them",
    "ensemble": "risk matrix, optimized weights and fig1 errors",
    "stack": "out-of-fold stacking and fig2 meta-loss",
    "mi": "information gain with permutation tests (fig3)",
    "tune": "Bayesian hyperparameter tuning (fig4)",
    "restart-bench": "restart-strategy benchmarks",
    "report": "render SVG plots and the manifest from existing tables",
    "run-all": "every stage in order",
    "describe": "print the resolved plan without running it",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridml", description=__doc__)
    parser.add_argument("--print-default-config", action="store_true",
                        help="print the default configuration file and exit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--seed", type=int, help="override run.seed")
    common.add_argument("--out", help="override run.out")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")
    for name, help_text in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_default_config:
        sys.stdout.write(default_config_text())
        return 0
    if not args.command:
        parser.print_help()
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError("run.seed: must be >= 0")
        cfg = load_config(args.config).with_overrides(seed=args.seed, out=args.out)
        if args.command == "describe":
            sys.stdout.write(describe(cfg))
            return 0
        out = OutputDir(cfg.out)
        if args.command == "report":
            for rel, text in render_all(out.root).items():
                out.write(rel, text)
            out.write_manifest(True)
        else:
            stages = planned_stages(cfg) if args.command == "run-all" else [args.command]
            report = run_stages(cfg, stages, out)
            print(f"wrote {len(report.files)} files to {report.out} in {report.wall_time:.1f}s")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"error in stage {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
