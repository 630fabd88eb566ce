"""config.py — Experiment configuration (mirrors reap.config.json).

Resolution order for every run:

  1. built-in defaults (the simulation settings table: N=200, θ ∈ [5, 15], k=20, B=1000,
     γ=10, δ=0.9)
  2. the JSON config file (``--config`` or ./reap.config.json when present)
  3. environment overrides: REAP_SEED, REAP_OUTPUT_DIR, REAP_LOG_LEVEL
  4. CLI flags (``--seed``, ``--out``, ``--format``)

Unknown fields are rejected at every level.
"""

from __future__ import annotations

import json
import os
from collections.abc import Mapping
from enum import StrEnum
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from reap.exceptions import ConfigError
from reap.models import (
    ContinuousScenario,
    DensityKind,
    DiscreteScenario,
    OracleSettings,
    PuType,
    RawDataModel,
    Regime,
    TypeDensity,
)

DEFAULT_CONFIG_NAME = "reap.config.json"
MAX_SEED = 2**64 - 1


class SweepParameter(StrEnum):
    BUDGET = "budget"
    K = "k"
    LAMBDA_GRID = "lambda-grid"


class OutputFormat(StrEnum):
    CSV = "csv"
    JSON = "json"


class SweepSpec(BaseModel):
    """A one-parameter sweep; ``lambda-grid`` ignores start/stop/steps and walks λ_1 × λ_2."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    parameter: SweepParameter
    start: float = 500.0
    stop: float = 1000.0
    steps: int = Field(default=6, ge=1)
    lambda_step: float = Field(default=10.0, gt=0, description="λ_2 grid step for lambda-grid.")
    lambda1_values: list[float] = Field(
        default_factory=lambda: [0.0, 50.0, 100.0, 150.0, 200.0, 250.0]
    )

    @model_validator(mode="after")
    def _nonempty(self) -> SweepSpec:
        if self.start > self.stop:
            raise ValueError(f"sweep range is empty: start {self.start} > stop {self.stop}")
        if self.steps == 1 and self.start != self.stop:
            raise ValueError("a single-step sweep needs start == stop")
        if not self.lambda1_values:
            raise ValueError("lambda1_values must not be empty")
        return self

    def values(self) -> list[float]:
        return np.linspace(self.start, self.stop, self.steps).tolist()


class ExperimentConfig(BaseModel):
    """Runtime configuration for every reap command."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    regime: Regime = Regime.INCOMPLETE
    budget: float = Field(default=1000.0, gt=0)
    gamma: float = Field(default=10.0, gt=0)
    delta: float = Field(default=0.9, ge=0, lt=1)
    n: int = Field(default=200, ge=1)
    types: list[PuType] | None = Field(
        default=None, description="Explicit type list; overrides theta_low/theta_high/k."
    )
    theta_low: float = Field(default=5.0, gt=0)
    theta_high: float = Field(default=15.0, gt=0)
    k: int = Field(default=20, ge=1)
    density: TypeDensity | None = Field(
        default=None, description="Continuous-regime density; uniform on the θ range when unset."
    )
    grid_size: int = Field(default=512, ge=64)
    sweep: SweepSpec | None = None
    trials: int = Field(default=10_000, ge=1)
    seed: int = Field(default=0, ge=0, le=MAX_SEED)
    output_dir: str = "results"
    format: OutputFormat = OutputFormat.CSV
    raw_data: RawDataModel = Field(default_factory=RawDataModel)
    oracle: OracleSettings = Field(default_factory=OracleSettings)
    log_level: str = "INFO"

    @model_validator(mode="after")
    def _theta_range(self) -> ExperimentConfig:
        if self.theta_low >= self.theta_high:
            raise ValueError(
                f"theta_low ({self.theta_low}) must be below theta_high ({self.theta_high})"
            )
        return self

    def discrete_scenario(self, *, k: int | None = None, budget: float | None = None) -> DiscreteScenario:
        """Explicit types, or ``k`` evenly spaced types on the θ range with λ_i = n/k."""
        b = self.budget if budget is None else budget
        if self.types is not None and k is None:
            types = list(self.types)
        else:
            count = self.k if k is None else k
            thetas = np.linspace(self.theta_low, self.theta_high, count)
            types = [PuType(theta=float(t), lam=self.n / count) for t in thetas]
        return DiscreteScenario(budget=b, gamma=self.gamma, delta=self.delta, types=types)

    def continuous_scenario(self) -> ContinuousScenario:
        density = self.density or TypeDensity(
            kind=DensityKind.UNIFORM, theta_low=self.theta_low, theta_high=self.theta_high
        )
        return ContinuousScenario(
            budget=self.budget, density=density, gamma=self.gamma, delta=self.delta, n=self.n
        )

    def with_overrides(self, **updates: Any) -> ExperimentConfig:
        """Return a validated copy with the non-None ``updates`` applied."""
        data = self.model_dump(mode="json", by_alias=True)
        data.update({key: value for key, value in updates.items() if value is not None})
        return ExperimentConfig.model_validate(data)


def _env_overrides(env: Mapping[str, str]) -> dict[str, Any]:
    overrides: dict[str, Any] = {}
    if "REAP_SEED" in env:
        try:
            overrides["seed"] = int(env["REAP_SEED"])
        except ValueError as exc:
            raise ConfigError(f"REAP_SEED must be an integer, got {env['REAP_SEED']!r}") from exc
    if "REAP_OUTPUT_DIR" in env:
        overrides["output_dir"] = env["REAP_OUTPUT_DIR"]
    if "REAP_LOG_LEVEL" in env:
        overrides["log_level"] = env["REAP_LOG_LEVEL"]
    return overrides


def load_config(path: Path | None = None, env: Mapping[str, str] | None = None) -> ExperimentConfig:
    """Load, validate and env-override an experiment configuration.

    Raises:
        ConfigError: If an explicit path is missing or the file is not valid JSON.
        pydantic.ValidationError: If a field fails validation (messages name the field).
    """
    env = os.environ if env is None else env
    raw: dict[str, Any] = {}
    if path is None and Path(DEFAULT_CONFIG_NAME).is_file():
        path = Path(DEFAULT_CONFIG_NAME)
    if path is not None:
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: expected a JSON object at the top level")
        raw = loaded

    raw.update(_env_overrides(env))
    return ExperimentConfig.model_validate(raw)
