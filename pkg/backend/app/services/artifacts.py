"""Experiment artifacts: CSV tables, the JSON summary and state snapshots.

Nothing written here carries a timestamp, so reruns of one config produce
byte-identical files.
"""

import csv
import json
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from app.services.snapshot import write_state
from app.services.spectral_core import PhaseState

logger = logging.getLogger(__name__)

DATA_FILE = "data.csv"
SUMMARY_FILE = "summary.json"


@dataclass(frozen=True)
class CheckResult:
    """One pass/fail verdict; margin >= 0 means the inequality held."""

    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    rows: tuple[tuple[Any, ...], ...]


@dataclass
class ExperimentResult:
    experiment: str
    parameters: dict[str, Any]
    checks: list[CheckResult] = field(default_factory=list)
    tables: dict[str, Table] = field(default_factory=dict)
    snapshots: dict[str, PhaseState] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def add_check(self, name: str, passed: bool, margin: float, detail: str = "") -> None:
        self.checks.append(CheckResult(name, bool(passed), float(margin), detail))

    def add_table(
        self, filename: str, columns: Sequence[str], rows: Sequence[Sequence[Any]]
    ) -> None:
        self.tables[filename] = Table(tuple(columns), tuple(tuple(r) for r in rows))

    def failing(self) -> list[CheckResult]:
        return [check for check in self.checks if not check.passed]


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "item"):
        return _cell(value.item())
    return str(value)


def _json_number(value: float) -> float | str:
    """JSON has no inf or nan; those are written as strings."""
    if math.isfinite(value):
        return value
    return repr(value)


def summary_payload(result: ExperimentResult) -> dict[str, Any]:
    return {
        "experiment": result.experiment,
        "parameters": result.parameters,
        "checks": {
            check.name: {
                "passed": check.passed,
                "margin": _json_number(check.margin),
                "detail": check.detail,
            }
            for check in result.checks
        },
        "passed": result.passed,
    }


def write_table(path: Path, table: Table) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_cell(v) for v in row])


def write_artifacts(result: ExperimentResult, out_root: Path) -> Path:
    """Writes <out_root>/<experiment>/ and returns the summary path."""
    directory = out_root / result.experiment
    directory.mkdir(parents=True, exist_ok=True)
    for filename, table in sorted(result.tables.items()):
        write_table(directory / filename, table)
        logger.info("Wrote %s", directory / filename)
    for stem, state in sorted(result.snapshots.items()):
        write_state(directory, stem, state)

    summary_path = directory / SUMMARY_FILE
    summary_path.write_text(
        json.dumps(summary_payload(result), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    logger.info("Wrote %s", summary_path)
    return summary_path
