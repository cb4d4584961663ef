"""Tests for experiment config parsing and validation."""

import pytest
from pydantic import ValidationError

from app.models.schemas import ExperimentConfig


def _write(tmp_path, body: str):
    path = tmp_path / "experiment.toml"
    path.write_text(body)
    return path


class TestExperimentConfig:
    def test_defaults(self):
        cfg = ExperimentConfig(experiment="growth")
        assert cfg.s == 0.5
        assert cfg.d == 3
        assert cfg.N_list == [8.0, 16.0, 32.0]
        assert cfg.M_list is None
        assert cfg.amplitude == 0.02
        assert cfg.bundle().epsilon1 == pytest.approx(1.0)

    def test_from_toml(self, tmp_path):
        path = _write(tmp_path, 'experiment = "tails"\ns = 0.6\nL = 4\nM_list = [2, 4]\n')
        cfg = ExperimentConfig.from_toml(path)
        assert cfg.experiment == "tails"
        assert cfg.s == 0.6
        assert cfg.L == 4
        assert cfg.M_list == [2.0, 4.0]

    def test_cli_name_and_overrides_win(self, tmp_path, caplog):
        path = _write(tmp_path, 'experiment = "tails"\nseed = 1\n')
        cfg = ExperimentConfig.from_toml(path, "growth", seed=9, dt=None)
        assert cfg.experiment == "growth"
        assert cfg.seed == 9
        assert cfg.dt == 1e-3
        assert "declares experiment 'tails'" in caplog.text

    def test_experiment_may_come_from_the_cli_only(self, tmp_path):
        cfg = ExperimentConfig.from_toml(_write(tmp_path, "d = 4\n"), "interp")
        assert cfg.d == 4

    def test_unknown_key_is_rejected(self, tmp_path):
        with pytest.raises(ValidationError, match="velocity"):
            ExperimentConfig.from_toml(_write(tmp_path, "velocity = 3\n"), "growth")

    @pytest.mark.parametrize(
        "body",
        [
            "epsilon = 0.3\n",
            "delta = 0.95\n",
            "s = 1.5\n",
            "d = 2\n",
            'dist = "cauchy"\n',
            "amplitude = 0\n",
        ],
    )
    def test_invalid_values(self, tmp_path, body):
        with pytest.raises(ValidationError):
            ExperimentConfig.from_toml(_write(tmp_path, body), "growth")

    def test_unknown_experiment(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(experiment="wave")
