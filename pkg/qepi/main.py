"""Command-line entrypoint: `run` executes check suites, `describe` summarizes a state."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from qepi import __version__, logging_conf
from qepi.config import RNG_ALGORITHM, load_run_config, settings
from qepi.errors import ConfigError, ParseError, QepiError
from qepi.models.dto import SUITES, RunConfig
from qepi.queue import run_ordered
from qepi.services import state_spec, suites
from qepi.services.report import ReportWriter

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ERROR = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qepi", description="Numerical checks of quantum entropy power inequalities"
    )
    parser.add_argument("--log-level", default="INFO", help="Logging level (default INFO)")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run a check suite and write a report")
    run.add_argument("--suite", choices=(*SUITES, "all"), help="Suite to run")
    run.add_argument("--config", type=Path, help="key=value run configuration file")
    run.add_argument("--seed", type=int, help="Root seed of every trial generator")
    run.add_argument("--trials", type=int, help="Random trials per suite")
    run.add_argument("--cutoff", type=int, help="Per-mode Fock cutoff")
    run.add_argument("--out", type=Path, dest="output", help="Report path")
    run.add_argument("--format", choices=("csv", "jsonl"), help="Report format")
    run.add_argument("--workers", type=int, help="Worker processes (default 1)")

    describe = commands.add_parser("describe", help="Summarize a state-constructor spec")
    describe.add_argument("spec", help='e.g. "thermal(1)" or "fock(2)*vacuum"')
    describe.add_argument("--format", choices=("text", "json"), default="text")
    describe.add_argument("--cutoff", type=int, help="Per-mode Fock cutoff")
    return parser


def _report_path(config: RunConfig) -> Path:
    if config.output is not None:
        return config.output
    return settings.output_dir / f"{config.suite}-{config.seed}.{config.format}"


def _header(config: RunConfig) -> dict[str, object]:
    settings_view = config.model_dump(mode="json", exclude={"output", "workers"})
    return {
        "qepi": __version__,
        "rng": RNG_ALGORITHM,
        "config": json.dumps(settings_view, sort_keys=True),
    }


def run_suite(config: RunConfig, *, log_level: int = logging.INFO) -> int:
    """Execute the configured suites; returns the process exit status."""

    tasks = suites.plan(config)
    path = _report_path(config)
    failures = 0
    rows = 0
    LOGGER.info("running %s: %d trial(s), report %s", config.suite, len(tasks), path)
    with ReportWriter(
        path, config.format, header=_header(config), mirror=config.jsonl_mirror
    ) as writer:
        for trial_rows in run_ordered(
            suites.run_trial, tasks, workers=config.workers, log_level=log_level
        ):
            for row in trial_rows:
                writer.write(row)
                rows += 1
                if row.normative and not row.passed:
                    failures += 1
                    LOGGER.warning(
                        "normative failure: %s/%s trial %d margin %.3e",
                        row.suite,
                        row.check,
                        row.trial,
                        row.margin,
                    )
    LOGGER.info("finished %s: %d row(s), %d normative failure(s)", config.suite, rows, failures)
    return EXIT_FAILED if failures else EXIT_OK


def _run(args: argparse.Namespace, log_level: int) -> int:
    overrides = {
        key: getattr(args, key)
        for key in ("suite", "seed", "trials", "cutoff", "output", "format", "workers")
    }
    config = load_run_config(args.config, overrides)
    return run_suite(config, log_level=log_level)


def _describe(args: argparse.Namespace) -> int:
    summary = state_spec.describe_state(args.spec, args.cutoff)
    if args.format == "json":
        print(json.dumps(summary, sort_keys=True, indent=2))
    else:
        print(state_spec.format_description(summary))
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    log_level = logging.getLevelName(str(args.log_level).upper())
    if not isinstance(log_level, int):
        parser.error(f"unknown log level {args.log_level!r}")
    logging_conf.configure_logging(log_level)

    try:
        if args.command == "describe":
            return _describe(args)
        return _run(args, log_level)
    except ConfigError as exc:
        for issue in exc.issues:
            LOGGER.error("config error: %s", issue)
            print(f"config error: {issue}", file=sys.stderr)
        return EXIT_ERROR
    except ParseError as exc:
        LOGGER.error("parse error: %s", exc)
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except KeyboardInterrupt:
        LOGGER.error("interrupted; partial report rows were flushed")
        return EXIT_ERROR
    except QepiError as exc:
        LOGGER.error("run failed: %s: %s", exc.__class__.__name__, exc)
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001
        LOGGER.exception("unexpected failure: %s: %s", exc.__class__.__name__, exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
