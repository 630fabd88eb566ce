"""Test helper factories for the reap test suite."""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np

from reap.config import ExperimentConfig
from reap.models import (
    ContinuousScenario,
    ContractItem,
    ContractMenu,
    DensityKind,
    DiscreteScenario,
    PuType,
    TypeDensity,
)

# k=2 instance with λ=(1,1), θ=(1,2), B=10 and its exact incomplete-information menu.
WORKED_EPSILONS = (3.246665, 2.251113)
WORKED_PAYMENTS = (5.497776, 4.502224)
WORKED_COMPLETE_EPSILONS = (3.864876, 3.067555)


def make_scenario(
    thetas: Sequence[float] = (1.0, 2.0),
    lambdas: Sequence[float] = (1.0, 1.0),
    budget: float = 10.0,
    gamma: float = 10.0,
    delta: float = 0.9,
) -> DiscreteScenario:
    """Factory helper for DiscreteScenario test instances (defaults: the k=2 worked case)."""
    return DiscreteScenario(
        budget=budget,
        gamma=gamma,
        delta=delta,
        types=[PuType(theta=t, lam=lam) for t, lam in zip(thetas, lambdas, strict=True)],
    )


def make_table_scenario(k: int = 20, n: int = 200, budget: float = 1000.0) -> DiscreteScenario:
    """k evenly spaced types on [5, 15] with λ_i = n/k (simulation settings defaults)."""
    return ExperimentConfig(k=k, n=n, budget=budget).discrete_scenario()


def make_menu(
    epsilons: Sequence[float],
    payments: Sequence[float],
    scenario: DiscreteScenario | None = None,
    regime: str = "incomplete",
) -> ContractMenu:
    s = scenario or make_scenario()
    return ContractMenu.model_validate(
        {
            "regime": regime,
            "types": list(s.types),
            "items": [ContractItem(epsilon=e, payment=p) for e, p in zip(epsilons, payments, strict=True)],
            "budget": s.budget,
            "gamma": s.gamma,
            "delta": s.delta,
        }
    )


def make_continuous(
    low: float = 5.0,
    high: float = 15.0,
    n: int = 200,
    budget: float = 1000.0,
    **density: Any,
) -> ContinuousScenario:
    """Continuous scenario; uniform on [low, high] unless density fields are given."""
    spec: dict[str, Any] = {"kind": DensityKind.UNIFORM, "theta_low": low, "theta_high": high}
    spec.update(density)
    return ContinuousScenario(
        budget=budget, density=TypeDensity.model_validate(spec), gamma=10.0, delta=0.9, n=n
    )


def make_config(output_dir: Path, **overrides: Any) -> ExperimentConfig:
    """ExperimentConfig writing into ``output_dir``."""
    return ExperimentConfig.model_validate({"output_dir": str(output_dir), **overrides})


# Tabulated density whose virtual type falls on [2, 3]: the contract function would rise there.
IRREGULAR_DENSITY: dict[str, Any] = {
    "kind": "tabulated",
    "theta_low": 1.0,
    "theta_high": 3.0,
    "nodes": [1.0, 2.0, 3.0],
    "values": [0.9, 0.1, 0.9],
}


def make_random_scenario(
    rng: np.random.Generator,
    k: int,
    theta_range: tuple[float, float] = (0.1, 100.0),
    lambda_range: tuple[float, float] = (1.0, 1000.0),
    budget_range: tuple[float, float] = (10.0, 10_000.0),
) -> DiscreteScenario:
    """k types with θ, λ and B drawn uniformly from the given ranges."""
    return make_scenario(
        thetas=np.sort(rng.uniform(*theta_range, size=k)).tolist(),
        lambdas=rng.uniform(*lambda_range, size=k).tolist(),
        budget=float(rng.uniform(*budget_range)),
    )
