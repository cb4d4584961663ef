"""Shared fixtures for backend service tests.

SUPWAVE_OUT/SUPWAVE_LEDGER must be set before app.config is first imported
(Settings reads the environment at class-definition time), so this happens
at collection time, before any test module runs.
"""

import os
from pathlib import Path

_TEST_DATA_DIR = Path(__file__).resolve().parent / ".test-data"
_TEST_DATA_DIR.mkdir(exist_ok=True)

os.environ.setdefault("SUPWAVE_OUT", str(_TEST_DATA_DIR / "out"))
os.environ.setdefault("SUPWAVE_LEDGER", str(_TEST_DATA_DIR / "runs.db"))

import pytest  # noqa: E402
import pytest_asyncio  # noqa: E402

from app import database  # noqa: E402
from app.config import settings  # noqa: E402
from app.services.randomization import (  # noqa: E402
    DistributionSpec,
    EnsembleSpec,
    make_base_pair,
    sample_pair,
)
from app.services.spectral_core import PhaseState  # noqa: E402


@pytest_asyncio.fixture
async def ledger(tmp_path):
    """A fresh ledger file per test; the engine is disposed afterwards."""
    database.configure(f"sqlite+aiosqlite:///{tmp_path / 'runs.db'}")
    await database.init_db()
    yield
    await database.dispose()


@pytest.fixture
def isolated_settings(tmp_path, monkeypatch):
    """Points artifacts and the ledger of a CLI run at tmp_path."""
    monkeypatch.setattr(settings, "OUTPUT_ROOT", str(tmp_path / "out"))
    monkeypatch.setattr(settings, "LEDGER_PATH", str(tmp_path / "runs.db"))
    return settings


@pytest.fixture
def small_ensemble() -> EnsembleSpec:
    return EnsembleSpec(make_base_pair(0.5, 3, L=2), DistributionSpec.of("gaussian"), 7)


@pytest.fixture
def small_sample(small_ensemble) -> PhaseState:
    """A d=3, L=2 draw scaled down so the cubic term stays mild."""
    return sample_pair(small_ensemble, 0).scaled(0.1)
