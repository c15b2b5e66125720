"""Command-line entry point: ``relaympr --config experiment.cfg``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import parse_config
from .errors import ConfigError
from .experiments import run_experiment, summarize, write_outputs

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_IO = 4

log = logging.getLogger("relaympr")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="relaympr",
        description="Relay queue and throughput analysis for random access with multi-packet reception.",
    )
    p.add_argument("--config", required=True, type=Path, help="experiment file (key = value lines)")
    p.add_argument("--output", type=Path, help="CSV destination (default: stdout)")
    p.add_argument("--seed", type=int, help="override the simulation seed")
    p.add_argument("--slots", type=int, help="override slots per replication")
    p.add_argument("--replications", type=int, help="override the replication count")
    p.add_argument("--format", choices=("csv", "summary"), default="csv")
    p.add_argument("--workers", type=int, default=1, help="processes for simulation replications")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = parse_config(args.config).with_overrides(
            seed=args.seed,
            slots=args.slots,
            replications=args.replications,
            output=args.output,
            format=args.format,
        )
    except ConfigError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    log.info("running %s over %d value sets", cfg.mode, len(cfg.values))
    result = run_experiment(cfg, workers=args.workers)

    try:
        if args.format == "summary":
            sys.stdout.write(summarize(result))
            if args.output is not None:
                write_outputs(result, args.output, sys.stdout)
        else:
            write_outputs(result, args.output, sys.stdout)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO

    if not result.any_stable:
        print("relay queue unstable at every point", file=sys.stderr)
        return EXIT_UNSTABLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
