"""``molrelay run <experiment|config-path>`` batch front-end.

Exit codes: 0 success, 1 invalid configuration, 2 numeric or resource failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time

from . import experiments
from .dmc import ChannelSizeError
from .mary import IntegrationError

THREADS_ENV = "MOLRELAY_THREADS"


def _parser():
    parser = argparse.ArgumentParser(prog="molrelay", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a sweep and write its table")
    run.add_argument("source", help=f"one of {', '.join(experiments.EXPERIMENTS)} or a YAML/JSON config file")
    run.add_argument("--out", help="output file (default: output_path from the config, else stdout)")
    run.add_argument("--format", choices=("csv", "json"), help="default: from the output suffix, else csv")
    run.add_argument("--threads", type=int, help=f"sweep workers (default: ${THREADS_ENV} or 1)")
    run.add_argument("--seed", type=int, help="override the Monte Carlo seed")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = experiments.load_config(args.source)
        if args.seed is not None:
            config = experiments.with_seed(config, args.seed)
        threads = args.threads if args.threads is not None else int(os.environ.get(THREADS_ENV, "1"))
        if threads < 1:
            raise experiments.ConfigError("--threads", "must be >= 1")
    except (experiments.ConfigError, ValueError) as exc:
        print(f"molrelay: invalid configuration: {exc}", file=sys.stderr)
        return 1

    out = args.out or config.output_path
    fmt = args.format or ("json" if out and out.endswith(".json") else "csv")
    start = time.perf_counter()
    try:
        table = experiments.run_experiment(config, threads=threads)
    except (experiments.SweepPointError, ChannelSizeError, IntegrationError, ArithmeticError, MemoryError) as exc:
        print(f"molrelay: {exc}", file=sys.stderr)
        return 2
    logging.getLogger("molrelay").info("%s finished in %.1f s", config.experiment, time.perf_counter() - start)

    try:
        experiments.emit(table, fmt, out)
    except OSError as exc:
        print(f"molrelay: cannot write output: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
