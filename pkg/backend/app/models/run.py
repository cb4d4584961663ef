"""Run ledger model: one CLI experiment invocation."""

from datetime import datetime, timezone

from sqlalchemy import Text
from sqlalchemy.orm import Mapped, mapped_column

from app.database import Base

RUN_STATUSES = ("running", "completed", "failed")


class ExperimentRun(Base):
    """An experiment run and where its artifacts went."""

    __tablename__ = "runs"

    id: Mapped[int] = mapped_column(primary_key=True)
    experiment: Mapped[str] = mapped_column()

    # running, completed, failed
    status: Mapped[str] = mapped_column(default="running")

    created_at: Mapped[datetime] = mapped_column(
        default=lambda: datetime.now(timezone.utc)
    )
    started_at: Mapped[datetime | None] = mapped_column(default=None)
    completed_at: Mapped[datetime | None] = mapped_column(default=None)

    # The fully resolved ExperimentConfig as JSON.
    config_snapshot: Mapped[str] = mapped_column(Text, default="{}")
    output_dir: Mapped[str] = mapped_column(default="")

    exit_code: Mapped[int | None] = mapped_column(default=None)
    passed: Mapped[bool | None] = mapped_column(default=None)
    error_message: Mapped[str | None] = mapped_column(Text, default=None)
