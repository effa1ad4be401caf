"""Command-line entry point.

Subcommands select pipeline stages; one config file drives them all, so a
partial rerun reuses the same parameters.  --out, --seed and --threads
override their config counterparts, and CONEFREQ_OUT supplies the default
output directory.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ALL_STAGES, load_config
from .errors import ConefreqError
from .pipeline import run_pipeline

_SUBCOMMANDS = ("validate", "mesh", "solve", "freq", "spectrum", "blowup", "ineq", "all")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conefreq",
        description="Frequency-function laboratory for Neumann problems on cone sectors.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMANDS:
        desc = ("run every enabled stage" if name == "all"
                else f"run the {name} stage only")
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True, help="path to the INI config file")
        p.add_argument("--out", default=None, help="output directory "
                       "(default: config value or CONEFREQ_OUT)")
        p.add_argument("--threads", type=int, default=None, help="cap on worker threads")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if name == "all":
            p.add_argument("--stage", default=None, choices=ALL_STAGES,
                           help="restrict to a single stage")
    return parser


def main(argv=None) -> None:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "all":
            if args.stage is not None:
                cfg.stages = (args.stage,)
        else:
            cfg.stages = (args.command,)
        out = args.out or os.environ.get("CONEFREQ_OUT") or cfg.output_dir
        result = run_pipeline(cfg, out_dir=out, threads=args.threads, seed=args.seed)
    except ConefreqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        sys.exit(2)
    for check in result.checks:
        tag = "PASS" if check.passed else "FAIL"
        print(f"[{tag}] {check.name}: {check.detail}")
    print(f"report bundle: {result.out_dir}")
    if result.status != 0:
        failed = ", ".join(c.name for c in result.checks if not c.passed)
        print(f"failed checks: {failed}", file=sys.stderr)
    sys.exit(result.status)


if __name__ == "__main__":
    main()
