"""
Command-line front door.

    python -m src.api.cli run <config> [--report PATH] [--dump-grid PATH]
                                       [--seed-check] [--max-points N]
    python -m src.api.cli verify <report> <config>

Exit status: 0 when every job is certified (or verified), 1 on job failures
or verification mismatches, 2 on configuration errors.
"""
from pathlib import Path
from typing import List, Optional
import argparse
import logging
import sys
import time

from config.logging_config import setup_logging
from config.settings import settings
from src.api.schemas import ConfigError, RunConfig, load_run_config
from src.core.compacta import CompactError
from src.services.construction_service import (
    BuildAbortedError, InvariantViolationError, UniversalSeriesConstructor
)
from src.services.report_service import ReportError, ReportService
from src.services.self_check import run_self_check

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def _parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="universal-series",
        description="Build power series whose partial sums approximate a schedule of targets.",
    )
    parser.add_argument(
        "--log-level",
        dest="log_level",
        type=str.upper,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        default=None,
    )
    parser.add_argument("--log-file", dest="log_file", type=Path, default=None)
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="build the series for a configuration")
    run.add_argument("config", type=Path)
    run.add_argument("--report", dest="report_path", type=Path, default=None)
    run.add_argument("--dump-grid", dest="dump_grid_path", type=Path, default=None)
    run.add_argument("--seed-check", dest="seed_check", action="store_true")
    run.add_argument("--max-points", dest="max_points", type=int, default=None)

    verify = commands.add_parser("verify", help="re-check a report against its configuration")
    verify.add_argument("report", type=Path)
    verify.add_argument("config", type=Path)
    verify.add_argument("--max-points", dest="max_points", type=int, default=None)
    return parser.parse_args(argv)


def _load_config(path: Path) -> Optional[RunConfig]:
    try:
        return load_run_config(path)
    except ConfigError as e:
        logger.error("%s", e)
        for line in e.diagnostics or [str(e)]:
            logger.error("  %s", line)
            print(line, file=sys.stderr)
        return None


def _constructor(config: RunConfig, max_points: Optional[int], check_invariants: bool) -> UniversalSeriesConstructor:
    approximator = config.approximator(max_points)
    return UniversalSeriesConstructor(
        config.to_enumeration(),
        config.to_transform(),
        config.to_mu(),
        approximator=approximator,
        config={'max_points': approximator.config['max_points']},
        check_invariants=check_invariants
    )


def run_command(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    if config is None:
        return EXIT_CONFIG

    constructor = _constructor(config, args.max_points, args.seed_check)
    jobs = config.to_jobs()
    timings = {}

    if args.seed_check:
        started = time.perf_counter()
        check = run_self_check(constructor.enumeration, constructor.transform, constructor.mu)
        timings['self_check_seconds'] = time.perf_counter() - started
        if not check.passed:
            for outcome in check.failures():
                print(f"self-check failed: {outcome.name}: {outcome.detail}", file=sys.stderr)
            return EXIT_FAILED

    started = time.perf_counter()
    try:
        result = constructor.build(jobs, abort_on_failure=config.abort_on_failure)
    except BuildAbortedError as e:
        result = e.result
    except InvariantViolationError as e:
        logger.error("Invariant violated: %s", e)
        print(f"invariant violated: {e}", file=sys.stderr)
        return EXIT_FAILED
    timings['build_seconds'] = time.perf_counter() - started

    service = ReportService(config.report_config())
    report = service.build_report(config.dict(), result, constructor.enumeration, timings)
    report_path = args.report_path or args.config.with_suffix('.report.json')
    service.write_report(report, report_path)
    if args.dump_grid_path is not None:
        service.dump_grid(args.dump_grid_path, result, jobs, constructor)

    for record in result.records:
        line = f"job {record.job_index} [{record.label}]: {record.status.value}"
        if record.succeeded:
            line += f", lambda={record.lam}, certified_error={record.certified_error:.3e}"
        elif record.message:
            line += f": {record.message}"
        print(line)
    print(f"report: {report_path}")
    return EXIT_OK if result.succeeded else EXIT_FAILED


def verify_command(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    if config is None:
        return EXIT_CONFIG

    service = ReportService(config.report_config())
    try:
        report = service.load_report(args.report)
        outcomes = service.verify(report, config.to_jobs(), _constructor(config, args.max_points, False))
    except (ReportError, CompactError) as e:
        logger.error("%s", e)
        print(str(e), file=sys.stderr)
        return EXIT_CONFIG

    failed = [o.job_index for o in outcomes if not o.passed]
    for outcome in outcomes:
        status = "ok" if outcome.passed else f"MISMATCH ({outcome.message})"
        print(f"job {outcome.job_index}: {status}")
    if failed:
        logger.error("Verification failed for jobs %s", failed)
        return EXIT_FAILED
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = _parse_args(argv)
    setup_logging(args.log_level, args.log_file)
    if args.command == "run":
        return run_command(args)
    return verify_command(args)


if __name__ == "__main__":
    raise SystemExit(main())
