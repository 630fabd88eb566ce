"""Tests for reap.config loading, validation and overrides."""

from __future__ import annotations

import json
from pathlib import Path

import pytest
from pydantic import ValidationError

from reap.config import ExperimentConfig, OutputFormat, SweepSpec, load_config
from reap.exceptions import ConfigError
from reap.models import Regime


def _write(path: Path, payload: object) -> Path:
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


class TestDefaults:
    """ExperimentConfig defaults and derived scenarios."""

    def test_simulation_settings(self) -> None:
        cfg = ExperimentConfig()
        assert (cfg.n, cfg.k, cfg.budget, cfg.gamma, cfg.delta) == (200, 20, 1000.0, 10.0, 0.9)
        assert (cfg.theta_low, cfg.theta_high) == (5.0, 15.0)
        assert cfg.regime is Regime.INCOMPLETE
        assert cfg.format is OutputFormat.CSV

    def test_even_types_with_equal_shares(self) -> None:
        s = ExperimentConfig(k=5, n=100).discrete_scenario()
        assert s.thetas.tolist() == [5.0, 7.5, 10.0, 12.5, 15.0]
        assert s.lambdas.tolist() == [20.0] * 5

    def test_explicit_types_win(self) -> None:
        cfg = ExperimentConfig.model_validate({"types": [{"theta": 1, "lambda": 2}, {"theta": 3, "lambda": 4}]})
        assert cfg.discrete_scenario().thetas.tolist() == [1.0, 3.0]

    def test_continuous_defaults_to_uniform(self) -> None:
        s = ExperimentConfig().continuous_scenario()
        assert s.density.theta_low == 5.0 and s.density.theta_high == 15.0
        assert s.n == 200

    def test_round_trip(self) -> None:
        cfg = ExperimentConfig.model_validate(
            {"types": [{"theta": 1, "lambda": 2}], "sweep": {"parameter": "k", "start": 5, "stop": 20, "steps": 4}}
        )
        again = ExperimentConfig.model_validate(cfg.model_dump(mode="json", by_alias=True))
        assert again == cfg


class TestValidation:
    """Field validation of ExperimentConfig."""

    def test_unknown_field_rejected(self) -> None:
        with pytest.raises(ValidationError, match="bugdet"):
            ExperimentConfig.model_validate({"bugdet": 10})

    def test_theta_range_must_be_nonempty(self) -> None:
        with pytest.raises(ValidationError, match="theta_low"):
            ExperimentConfig(theta_low=10.0, theta_high=5.0)

    def test_trials_must_be_positive(self) -> None:
        with pytest.raises(ValidationError, match="trials"):
            ExperimentConfig(trials=0)

    def test_empty_sweep_range(self) -> None:
        with pytest.raises(ValidationError, match="empty"):
            SweepSpec.model_validate({"parameter": "budget", "start": 10, "stop": 5})

    def test_unknown_sweep_parameter(self) -> None:
        with pytest.raises(ValidationError):
            SweepSpec.model_validate({"parameter": "gamma"})

    def test_sweep_values(self) -> None:
        spec = SweepSpec.model_validate({"parameter": "budget", "start": 500, "stop": 1000, "steps": 6})
        assert spec.values() == [500.0, 600.0, 700.0, 800.0, 900.0, 1000.0]


class TestLoadConfig:
    """Unit tests for load_config()."""

    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "absent.json", env={})

    def test_invalid_json(self, tmp_path: Path) -> None:
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(path, env={})

    def test_top_level_must_be_object(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigError, match="object"):
            load_config(_write(tmp_path / "list.json", [1, 2]), env={})

    def test_file_values_are_used(self, tmp_path: Path) -> None:
        cfg = load_config(_write(tmp_path / "c.json", {"budget": 500, "regime": "complete"}), env={})
        assert cfg.budget == 500.0
        assert cfg.regime is Regime.COMPLETE

    def test_env_overrides_file(self, tmp_path: Path) -> None:
        path = _write(tmp_path / "c.json", {"seed": 1, "output_dir": "a"})
        cfg = load_config(path, env={"REAP_SEED": "42", "REAP_OUTPUT_DIR": "b", "REAP_LOG_LEVEL": "DEBUG"})
        assert (cfg.seed, cfg.output_dir, cfg.log_level) == (42, "b", "DEBUG")

    def test_bad_env_seed(self) -> None:
        with pytest.raises(ConfigError, match="REAP_SEED"):
            load_config(None, env={"REAP_SEED": "abc"})

    def test_defaults_without_file(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.chdir(tmp_path)
        assert load_config(None, env={}) == ExperimentConfig()

    def test_default_file_is_picked_up(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.chdir(tmp_path)
        _write(tmp_path / "reap.config.json", {"k": 7})
        assert load_config(None, env={}).k == 7


class TestOverrides:
    """Unit tests for ExperimentConfig.with_overrides()."""

    def test_none_values_are_skipped(self) -> None:
        cfg = ExperimentConfig(seed=3).with_overrides(seed=None, output_dir="out")
        assert cfg.seed == 3
        assert cfg.output_dir == "out"

    def test_overrides_are_validated(self) -> None:
        with pytest.raises(ValidationError):
            ExperimentConfig().with_overrides(seed=-1)
