"""Environment configuration: process-level settings."""

import os
from pathlib import Path


class Settings:
    """Process-level settings loaded from environment variables.

    Distinct from app.models.schemas.ExperimentConfig: this class covers
    where artifacts and the run ledger live and how much the process logs,
    which is needed before any experiment file has been read.
    """

    OUTPUT_ROOT: str = os.environ.get("SUPWAVE_OUT", "./supwave-out")
    LOG_LEVEL: str = os.environ.get("LOG_LEVEL", "INFO")
    WORKERS: int = int(os.environ.get("SUPWAVE_WORKERS", "1"))
    LEDGER_PATH: str = os.environ.get(
        "SUPWAVE_LEDGER", str(Path(OUTPUT_ROOT) / "runs.db")
    )

    @property
    def LEDGER_URL(self) -> str:
        return f"sqlite+aiosqlite:///{self.LEDGER_PATH}"

    def ensure_directories(self) -> None:
        Path(self.OUTPUT_ROOT).mkdir(parents=True, exist_ok=True)
        Path(self.LEDGER_PATH).parent.mkdir(parents=True, exist_ok=True)


settings = Settings()
