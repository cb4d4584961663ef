"""Run ledger bookkeeping: opening, closing and reconciling ledger rows."""

import logging
from datetime import datetime, timezone

from sqlalchemy import select

from app import database
from app.models.run import ExperimentRun

logger = logging.getLogger(__name__)

INTERRUPTED_MESSAGE = "Interrupted before completion"


async def reconcile_interrupted_runs() -> list[int]:
    """Fail any run left "running" by a process that was killed.

    Nothing else ever moves a row out of "running" once its process is gone.
    """
    async with database.session() as db:
        result = await db.execute(
            select(ExperimentRun).where(ExperimentRun.status == "running")
        )
        stale_runs = result.scalars().all()
        if not stale_runs:
            return []

        now = datetime.now(timezone.utc)
        for run in stale_runs:
            run.status = "failed"
            run.completed_at = now
            run.error_message = INTERRUPTED_MESSAGE
        await db.commit()
        ids = [r.id for r in stale_runs]
        logger.warning(
            "Marked %d interrupted run(s) as failed on startup: %s", len(ids), ids
        )
        return ids


async def open_run(experiment: str, config_snapshot: str, output_dir: str) -> int:
    now = datetime.now(timezone.utc)
    async with database.session() as db:
        run = ExperimentRun(
            experiment=experiment,
            status="running",
            started_at=now,
            config_snapshot=config_snapshot,
            output_dir=output_dir,
        )
        db.add(run)
        await db.commit()
        return run.id


async def close_run(
    run_id: int,
    exit_code: int,
    passed: bool | None,
    error_message: str | None = None,
) -> None:
    async with database.session() as db:
        run = await db.get(ExperimentRun, run_id)
        if run is None:
            logger.warning("Ledger row %s vanished before it could be closed", run_id)
            return
        run.status = "completed" if exit_code in (0, 3) else "failed"
        run.completed_at = datetime.now(timezone.utc)
        run.exit_code = exit_code
        run.passed = passed
        run.error_message = error_message
        await db.commit()


async def recent_runs(limit: int = 20) -> list[ExperimentRun]:
    async with database.session() as db:
        result = await db.execute(
            select(ExperimentRun).order_by(ExperimentRun.id.desc()).limit(limit)
        )
        return list(result.scalars().all())
