"""Run ledger database: engine and session management."""

import logging

from sqlalchemy import event
from sqlalchemy.ext.asyncio import (
    AsyncEngine,
    AsyncSession,
    async_sessionmaker,
    create_async_engine,
)
from sqlalchemy.orm import declarative_base

from app.config import settings

logger = logging.getLogger(__name__)

Base = declarative_base()

_engine: AsyncEngine | None = None
_sessionmaker: async_sessionmaker[AsyncSession] | None = None


def _set_sqlite_pragma(dbapi_connection, connection_record) -> None:
    """WAL lets `supwave history` read while a run writes; busy_timeout makes
    a second concurrent process retry instead of failing with "database is
    locked"."""
    cursor = dbapi_connection.cursor()
    cursor.execute("PRAGMA journal_mode=WAL")
    cursor.execute("PRAGMA synchronous=NORMAL")
    cursor.execute("PRAGMA busy_timeout=5000")
    cursor.close()


def configure(url: str | None = None) -> AsyncEngine:
    """(Re)bind the ledger to `url`, defaulting to settings.LEDGER_URL.

    The engine is created lazily so importing the package never touches the
    filesystem.
    """
    global _engine, _sessionmaker
    _engine = create_async_engine(url or settings.LEDGER_URL, echo=False)
    event.listen(_engine.sync_engine, "connect", _set_sqlite_pragma)
    _sessionmaker = async_sessionmaker(
        _engine,
        class_=AsyncSession,
        expire_on_commit=False,
        autoflush=False,
    )
    return _engine


def get_engine() -> AsyncEngine:
    if _engine is None:
        return configure()
    return _engine


def session() -> AsyncSession:
    if _sessionmaker is None:
        configure()
    assert _sessionmaker is not None
    return _sessionmaker()


async def init_db() -> None:
    """Create tables if they don't exist. The ledger has one table and no
    migration history, so there is no Alembic."""
    # Registers ExperimentRun on Base.metadata.
    from app.models import run  # noqa: F401

    async with get_engine().begin() as conn:
        await conn.run_sync(Base.metadata.create_all)


async def dispose() -> None:
    global _engine, _sessionmaker
    if _engine is not None:
        await _engine.dispose()
    _engine = None
    _sessionmaker = None
