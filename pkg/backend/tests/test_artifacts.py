"""Tests for CSV tables, the JSON summary and snapshot output."""

import json
import math

from app.services.artifacts import ExperimentResult, write_artifacts
from app.services.snapshot import read_state


def _result(small_sample=None) -> ExperimentResult:
    result = ExperimentResult("energy-check", {"seed": 42, "N": 16.0})
    result.add_check("energy_drift", True, 1e-7, "max relative drift 1e-13")
    result.add_check("second_order", False, -math.inf, "no ratios")
    result.add_table("data.csv", ("t", "energy", "note"), [(0.0, 1.5, None), (0.5, 1.25, True)])
    if small_sample is not None:
        result.snapshots["final"] = small_sample
    return result


class TestExperimentResult:
    def test_verdict(self):
        result = _result()
        assert not result.passed
        assert [c.name for c in result.failing()] == ["second_order"]

    def test_no_checks_passes(self):
        assert ExperimentResult("interp", {}).passed


class TestWriteArtifacts:
    def test_layout(self, tmp_path, small_sample):
        summary_path = write_artifacts(_result(small_sample), tmp_path)
        directory = tmp_path / "energy-check"
        assert summary_path == directory / "summary.json"
        assert (directory / "data.csv").read_text() == "t,energy,note\n0.0,1.5,\n0.5,1.25,true\n"
        assert read_state(directory, "final") == small_sample

    def test_summary_payload(self, tmp_path):
        summary = json.loads(write_artifacts(_result(), tmp_path).read_text())
        assert summary["experiment"] == "energy-check"
        assert summary["passed"] is False
        assert summary["parameters"] == {"N": 16.0, "seed": 42}
        assert summary["checks"]["energy_drift"]["passed"] is True
        assert summary["checks"]["second_order"]["margin"] == "-inf"

    def test_reruns_are_byte_identical(self, tmp_path, small_sample):
        first = write_artifacts(_result(small_sample), tmp_path / "a").parent
        second = write_artifacts(_result(small_sample), tmp_path / "b").parent
        names = sorted(p.name for p in first.iterdir())
        assert names == sorted(p.name for p in second.iterdir())
        for name in names:
            assert (first / name).read_bytes() == (second / name).read_bytes()
