"""Command-line entry point: `supwave <experiment>` and `supwave history`."""

import argparse
import asyncio
import logging
import sys
import tomllib
from pathlib import Path

from pydantic import ValidationError

from app import database
from app.config import settings
from app.models.schemas import EXPERIMENTS, ExperimentConfig, RunSummary
from app.services.artifacts import ExperimentResult, write_artifacts
from app.services.experiments import run_experiment
from app.services.lifecycle import (
    close_run,
    open_run,
    recent_runs,
    reconcile_interrupted_runs,
)

logger = logging.getLogger(__name__)

EXIT_PASSED = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_CHECK_FAILED = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supwave",
        description="Numerical experiments for the randomized supercritical cubic wave equation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        cmd = sub.add_parser(name, help=f"run the {name} experiment")
        cmd.add_argument("--config", type=Path, required=True, help="TOML experiment file")
        cmd.add_argument("--out", type=Path, default=None, help="artifact root directory")
        cmd.add_argument("--workers", type=int, default=None, help="parallel trajectories")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
    history = sub.add_parser("history", help="list recent runs from the ledger")
    history.add_argument("--limit", type=int, default=20)
    return parser


def _describe_validation(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        where = ".".join(str(p) for p in err["loc"]) or "config"
        parts.append(f"{where}: {err['msg']}")
    return "; ".join(parts)


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig.from_toml(args.config, args.command, seed=args.seed)


async def _open_ledger(cfg: ExperimentConfig, out_root: Path) -> int | None:
    """A broken ledger never stops an experiment; it only loses the record."""
    try:
        database.configure()
        await database.init_db()
        await reconcile_interrupted_runs()
        return await open_run(
            cfg.experiment, cfg.model_dump_json(), str(out_root / cfg.experiment)
        )
    except Exception as e:
        logger.warning("Run ledger unavailable: %s", e)
        return None


async def _close_ledger(
    run_id: int | None, exit_code: int, passed: bool | None, error: str | None
) -> None:
    if run_id is None:
        return
    try:
        await close_run(run_id, exit_code, passed, error)
    except Exception as e:
        logger.warning("Could not close ledger row %s: %s", run_id, e)


def _report(result: ExperimentResult, summary_path: Path) -> int:
    print(f"summary: {summary_path}")
    if result.passed:
        print(f"{result.experiment}: PASS ({len(result.checks)} checks)")
        return EXIT_PASSED
    for check in result.failing():
        print(f"FAIL {check.name}: margin {check.margin:.6g} ({check.detail})")
    print(f"{result.experiment}: FAIL")
    return EXIT_CHECK_FAILED


async def run_command(cfg: ExperimentConfig, out_root: Path, workers: int) -> int:
    settings.ensure_directories()
    out_root.mkdir(parents=True, exist_ok=True)
    run_id = await _open_ledger(cfg, out_root)
    passed: bool | None = None
    error: str | None = None
    try:
        result = await run_experiment(cfg, workers)
        summary_path = write_artifacts(result, out_root)
        passed = result.passed
        exit_code = _report(result, summary_path)
    except ValueError as e:
        # Every constraint the library enforces surfaces as a ValueError subclass.
        error = f"{type(e).__name__}: {e}"
        print(f"configuration error: {error}", file=sys.stderr)
        exit_code = EXIT_CONFIG
    except Exception as e:
        logger.exception("Experiment %s crashed", cfg.experiment)
        error = f"{type(e).__name__}: {e}"
        exit_code = EXIT_ERROR
    await _close_ledger(run_id, exit_code, passed, error)
    await database.dispose()
    return exit_code


async def history_command(limit: int) -> int:
    settings.ensure_directories()
    database.configure()
    try:
        await database.init_db()
        runs = [RunSummary.model_validate(r) for r in await recent_runs(limit)]
    finally:
        await database.dispose()
    if not runs:
        print("no runs recorded")
        return EXIT_PASSED
    for run in runs:
        verdict = "-" if run.passed is None else ("pass" if run.passed else "fail")
        print(
            f"{run.id:>5}  {run.experiment:<13} {run.status:<10} "
            f"{run.created_at:%Y-%m-%d %H:%M:%S}  exit={run.exit_code}  {verdict}  {run.output_dir}"
        )
    return EXIT_PASSED


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )

    if args.command == "history":
        return asyncio.run(history_command(args.limit))

    try:
        cfg = load_config(args)
    except ValidationError as e:
        print(f"invalid config {args.config}: {_describe_validation(e)}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, tomllib.TOMLDecodeError, ValueError) as e:
        print(f"invalid config {args.config}: {e}", file=sys.stderr)
        return EXIT_CONFIG

    workers = args.workers if args.workers is not None else settings.WORKERS
    if workers < 1:
        print("--workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    out_root = args.out if args.out is not None else Path(settings.OUTPUT_ROOT)
    return asyncio.run(run_command(cfg, out_root, workers))


if __name__ == "__main__":
    sys.exit(main())
