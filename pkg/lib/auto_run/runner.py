"""
Command-line entry point: single evaluations, sweeps, method comparisons and raw SNR samples.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from functools import partial
from pathlib import Path
from typing import List, Optional

import pandas as pd

from lib.analysis.metrics import METHODS
from lib.auto_run import util
from lib.auto_run.scenario import load_config, sweep_points
from lib.config import DefaultConfig
from lib.errors import ConfigError, EngineError
from lib.simulation.montecarlo import HOPS, sample_hop

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_COMPARE_FAILED = 3


def configure_logging(level: str) -> None:
    """
    Send log records to the log file and the console.

    Parameters:
        level (str): Logging level name.
    Returns:
        None
    Raises:
        None
    """
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=DefaultConfig.LOG_FORMAT,
        handlers=[logging.FileHandler(DefaultConfig.LOG_FILE), logging.StreamHandler()],
    )


def build_parser() -> argparse.ArgumentParser:
    """
    Build the command line: one subcommand per verb sharing the scenario options.

    Parameters:
        None
    Returns:
        argparse.ArgumentParser: Parser for eval, sweep, compare and sample.
    Raises:
        None
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario JSON file (bare names resolve in configs/)")
    common.add_argument("--out", type=Path, help="output CSV file, stdout when omitted")
    common.add_argument("--seed", type=int, help="Monte-Carlo seed overriding the scenario")
    common.add_argument("--method", choices=METHODS, help="evaluation method overriding the scenario")
    common.add_argument("--no-header-timestamp", action="store_true", help="reproducible output without timing")
    common.add_argument("--workers", type=int, default=DefaultConfig.WORKERS, help="worker threads")
    common.add_argument("--log-level", default="INFO", help="logging level")

    parser = argparse.ArgumentParser(prog="secrecy-engine", description=__doc__)
    verbs = parser.add_subparsers(dest="verb", required=True)
    verbs.add_parser("eval", parents=[common], help="evaluate the scenario's base network")
    verbs.add_parser("sweep", parents=[common], help="run the scenario sweep")
    compare = verbs.add_parser("compare", parents=[common], help="three-method agreement table")
    compare.add_argument("--physical", action="store_true", help="also report physical-mode Monte-Carlo")
    sample = verbs.add_parser("sample", parents=[common], help="raw SNR draws of one hop")
    sample.add_argument("--hop", choices=HOPS, default="pq")
    sample.add_argument("--count", type=int, default=100_000)
    return parser


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)


def run(args: argparse.Namespace) -> int:
    """
    Execute one verb.

    Parameters:
        args (argparse.Namespace): Parsed command line.
    Returns:
        int: Process exit code.
    Raises:
        EngineError: On configuration or numerical failures outside per-point handling.
    """
    if args.workers < 1:
        raise ConfigError("must be >= 1", "--workers")
    net, sweep, trunc, plan = load_config(args.config)
    if args.seed is not None:
        plan = replace(plan, seed=args.seed)
    methods = (args.method,) if args.method else None
    stamp = not args.no_header_timestamp

    if args.verb == "sample":
        draws = sample_hop(net, args.hop, args.count, plan.seed, plan.block_size)
        frame = pd.DataFrame({"snr": draws})
        text = frame.to_csv(index=False, float_format="%.12g", lineterminator="\n")
        if args.out:
            args.out.write_text(text, encoding="utf-8")
        _emit(text, args.out)
        logger.info("Sampled %d draws of hop %s", args.count, args.hop)
        return EXIT_OK

    if args.verb == "eval":
        sweep = replace(sweep, grid=sweep.grid[:1], curves=sweep.curves[:1])

    points = sweep_points(net, sweep, methods)
    logger.info("Evaluating %d points with %d workers", len(points), args.workers)

    if args.verb == "compare":
        unique = _unique_metric_points(points)
        compare = partial(
            util.compare_row,
            trunc=trunc,
            plan=plan,
            physical=args.physical,
            workers=util.block_workers(args.workers, len(unique)),
        )
        rows = util.run_parallel(compare, unique, args.workers)
        _emit(util.write_csv(rows, util.COMPARE_COLUMNS, args.out, stamp), args.out)
        failed = [row for row in rows if not row["passed"]]
        if failed:
            logger.error("%d of %d comparisons failed", len(failed), len(rows))
            return EXIT_COMPARE_FAILED
        return EXIT_OK

    rows = util.run_sweep(points, trunc, plan, args.workers)
    _emit(util.write_csv(rows, util.SWEEP_COLUMNS, args.out, stamp), args.out)
    failures = [row for row in rows if row["error"]]
    if failures:
        logger.error("%d of %d points failed", len(failures), len(rows))
        return EngineError.exit_code
    return EXIT_OK


def _unique_metric_points(points: List[util.SweepPoint]) -> List[util.SweepPoint]:
    """One point per curve, value and metric; compare runs every method itself."""
    seen, unique = set(), []
    for point in points:
        key = (point.curve, point.value, point.metric)
        if key not in seen:
            seen.add(key)
            unique.append(point)
    return unique


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run the verb and map failures to exit codes.

    Parameters:
        argv (Optional[List[str]]): Arguments, sys.argv[1:] when omitted.
    Returns:
        int: 0 on success, 1 for configuration errors, 2 for numerical failures,
            3 when a comparison is out of tolerance.
    Raises:
        None
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return run(args)
    except EngineError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return 130
    except Exception as exc:
        logger.exception("Runner failed: %s", exc)
        return EngineError.exit_code


if __name__ == "__main__":
    sys.exit(main())
