"""Command-line entry point: ``rislink <scenario> [--config FILE] ...``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import SimulationConfig, load_config, parse_config
from .errors import RisSimError
from .harness import run

SUBCOMMANDS = ("decouple", "multiuser", "coexist", "ttd", "frames", "sweep")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rislink", description="RIS-assisted link-level simulator")
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--format", choices=("csv", "json"), help="output format (overrides config)")
        p.add_argument("--per-trial", action="store_true", default=None, help="also write per-trial rows")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = dict(scenario=args.scenario, seed=args.seed, out_dir=args.out, format=args.format,
                     per_trial=args.per_trial)
    try:
        cfg: SimulationConfig = (load_config(args.config, **overrides) if args.config
                                 else parse_config("", "<defaults>", **overrides))
    except RisSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = run(cfg)
    if result.status:
        print(f"error: {result.message}", file=sys.stderr)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
