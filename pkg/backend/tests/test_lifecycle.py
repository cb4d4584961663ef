"""Tests for run ledger bookkeeping and startup reconciliation."""

import pytest
from sqlalchemy import select, text

from app import database
from app.models.run import ExperimentRun
from app.services.lifecycle import (
    INTERRUPTED_MESSAGE,
    close_run,
    open_run,
    recent_runs,
    reconcile_interrupted_runs,
)


async def _make_run(status: str) -> int:
    async with database.session() as db:
        run = ExperimentRun(experiment="tails", status=status)
        db.add(run)
        await db.commit()
        await db.refresh(run)
        return run.id


@pytest.mark.asyncio
class TestReconcileInterruptedRuns:
    async def test_marks_running_as_failed(self, ledger):
        running_id = await _make_run("running")
        completed_id = await _make_run("completed")

        ids = await reconcile_interrupted_runs()

        async with database.session() as db:
            result = await db.execute(select(ExperimentRun))
            runs = {r.id: r for r in result.scalars().all()}

        assert ids == [running_id]
        assert runs[running_id].status == "failed"
        assert runs[running_id].error_message == INTERRUPTED_MESSAGE
        assert runs[running_id].completed_at is not None
        assert runs[completed_id].status == "completed"
        assert runs[completed_id].error_message is None

    async def test_noop_when_nothing_stale(self, ledger):
        await _make_run("completed")
        assert await reconcile_interrupted_runs() == []


@pytest.mark.asyncio
class TestRunBookkeeping:
    async def test_open_then_close_passed(self, ledger):
        run_id = await open_run("gronwall", '{"seed": 1}', "/tmp/out/gronwall")
        await close_run(run_id, 0, True)

        (run,) = await recent_runs()
        assert run.id == run_id
        assert run.status == "completed"
        assert run.exit_code == 0
        assert run.passed is True
        assert run.started_at is not None
        assert run.config_snapshot == '{"seed": 1}'

    async def test_failed_check_still_completes(self, ledger):
        run_id = await open_run("growth", "{}", "out/growth")
        await close_run(run_id, 3, False)
        (run,) = await recent_runs()
        assert run.status == "completed"
        assert run.passed is False

    async def test_crash_is_failed(self, ledger):
        run_id = await open_run("growth", "{}", "out/growth")
        await close_run(run_id, 1, None, "RuntimeError: boom")
        (run,) = await recent_runs()
        assert run.status == "failed"
        assert run.error_message == "RuntimeError: boom"

    async def test_closing_a_missing_row_only_warns(self, ledger, caplog):
        await close_run(999, 0, True)
        assert "vanished" in caplog.text

    async def test_recent_runs_newest_first(self, ledger):
        ids = [await open_run("interp", "{}", "out") for _ in range(3)]
        runs = await recent_runs(limit=2)
        assert [r.id for r in runs] == ids[::-1][:2]


@pytest.mark.asyncio
class TestDatabase:
    async def test_wal_journal(self, ledger):
        async with database.get_engine().connect() as conn:
            mode = (await conn.execute(text("PRAGMA journal_mode"))).scalar()
        assert mode == "wal"

    async def test_init_db_is_idempotent(self, ledger):
        await database.init_db()
        async with database.get_engine().connect() as conn:
            tables = (
                await conn.execute(text("SELECT name FROM sqlite_master WHERE type='table'"))
            ).scalars().all()
        assert "runs" in tables
