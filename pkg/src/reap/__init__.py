"""reap — privacy-payment contract design for participatory crowdsensing.

A fusion center with a fixed budget buys accuracy from users who perturb their readings with
Laplace noise. It offers a menu of (privacy level, payment) contracts; the package solves for
the accuracy-optimal menu under complete and incomplete information about user types and for a
continuum of types, checks menus against brute-force oracles, and simulates reporting rounds.
"""

from reap.continuous import discretize_density, eval_menu, solve_continuous
from reap.discrete import check_constraints, solve, solve_complete, solve_incomplete
from reap.exceptions import (
    ConfigError,
    ContinuousSolverError,
    DomainError,
    NumericalError,
    OracleError,
    ReapError,
    ScenarioError,
)
from reap.models import (
    ContinuousMenu,
    ContinuousScenario,
    ContractItem,
    ContractMenu,
    DiscreteScenario,
    PuType,
    Regime,
    TypeDensity,
)
from reap.oracle import kkt_residuals, oracle_complete, oracle_incomplete
from reap.privacy import calibrate_laplace, predicted_accuracy
from reap.simulator import build_population, monte_carlo, run_round, select_item

__all__ = [
    "ConfigError",
    "ContinuousMenu",
    "ContinuousScenario",
    "ContinuousSolverError",
    "ContractItem",
    "ContractMenu",
    "DiscreteScenario",
    "DomainError",
    "NumericalError",
    "OracleError",
    "PuType",
    "ReapError",
    "Regime",
    "ScenarioError",
    "TypeDensity",
    "build_population",
    "calibrate_laplace",
    "check_constraints",
    "discretize_density",
    "eval_menu",
    "kkt_residuals",
    "monte_carlo",
    "oracle_complete",
    "oracle_incomplete",
    "predicted_accuracy",
    "run_round",
    "select_item",
    "solve",
    "solve_complete",
    "solve_continuous",
    "solve_incomplete",
]
