"""experiments.py — Menu design, verification, sweeps and figure data behind the CLI.

Everything here is pure given an ``ExperimentConfig``: the CLI decides where results go.

Figure data (CSV only, no rendering):
  fig2  ratio α_incomplete/α_complete over the λ_1 × λ_2 grid (θ = 1, 2, 3; N = 300; B = 1000)
  fig3  ε per type index under both regimes
  fig4  utility of types 5, 10 and 15 for every item of the incomplete menu
  fig5  α versus budget over [500, 1000]
  fig6  α versus the number of types over {5, 10, 15, 20}
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, Field, computed_field
from scipy import integrate

from reap.config import ExperimentConfig, SweepParameter
from reap.continuous import alpha_of_continuous_menu, objective_continuous, solve_continuous
from reap.discrete import (
    alpha_of_menu,
    binding_residuals,
    check_constraints,
    objective_value,
    solve,
    solve_complete,
    solve_incomplete,
    utility,
)
from reap.exceptions import ConfigError
from reap.models import (
    ContinuousMenu,
    ContinuousScenario,
    ContractMenu,
    DiscreteScenario,
    PuType,
    Regime,
    SweepResult,
    SweepRow,
)
from reap.oracle import ORACLE_MAX_TYPES, kkt_residuals, oracle_complete, oracle_incomplete
from reap.simulator import stream

logger: structlog.BoundLogger = structlog.get_logger(__name__)

EQUALITY_TOL = 1e-9
ORACLE_RTOL = 1e-3
CONTINUOUS_IC_RTOL = 1e-6
IC_SAMPLE_PAIRS = 100

FIG2_THETAS = (1.0, 2.0, 3.0)
FIG2_POPULATION = 300.0
FIG2_BUDGET = 1000.0
FIG2_GAMMA = 10.0
FIG2_DELTA = 0.9
FIG4_TYPES = (5, 10, 15)
FIG5_BUDGETS = (500.0, 600.0, 700.0, 800.0, 900.0, 1000.0)
FIG6_TYPE_COUNTS = (5, 10, 15, 20)
FIGURE_IDS = ("fig2", "fig3", "fig4", "fig5", "fig6")


# ---------------------------------------------------------------------------
# Design
# ---------------------------------------------------------------------------


class DesignSummary(BaseModel):
    regime: Regime
    types: int
    alpha: float
    objective: float


def design(config: ExperimentConfig) -> tuple[ContractMenu | ContinuousMenu, DesignSummary]:
    """Solve the configured regime; the summary carries α and the objective."""
    if config.regime is Regime.CONTINUOUS:
        cs = config.continuous_scenario()
        cmenu = solve_continuous(cs, config.grid_size)
        return cmenu, DesignSummary(
            regime=config.regime,
            types=len(cmenu.grid),
            alpha=alpha_of_continuous_menu(cmenu, cs),
            objective=objective_continuous(cmenu, cs),
        )
    s = config.discrete_scenario().populated()
    menu = solve(s, config.regime)
    return menu, DesignSummary(
        regime=config.regime,
        types=menu.k,
        alpha=alpha_of_menu(menu, s),
        objective=objective_value(menu, s),
    )


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


class CheckResult(BaseModel):
    name: str
    passed: bool
    residual: float
    tolerance: float
    detail: str = ""


class VerificationReport(BaseModel):
    """Outcome of every check run against one menu."""

    regime: Regime
    types: int
    checks: list[CheckResult] = Field(default_factory=list)
    oracle_objective: float | None = None
    oracle_skipped: str | None = None

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]


def _worst(residuals: dict[str, float]) -> tuple[str, float]:
    key = max(residuals, key=lambda name: abs(residuals[name]))
    return key, residuals[key]


def verify_menu(menu: ContractMenu, config: ExperimentConfig) -> VerificationReport:
    """Constraint, binding-equality, stationarity and (k <= 3) oracle checks for a menu."""
    s = menu.scenario().populated()
    report = VerificationReport(regime=menu.regime, types=menu.k)
    constraints = check_constraints(menu, s)

    violations = {v.constraint: v.residual for v in constraints.violations(EQUALITY_TOL)}
    groups = {
        "ir": {k: v for k, v in violations.items() if k.startswith("ir")},
        "ic": {k: v for k, v in violations.items() if k.startswith("ic")},
        "budget": {k: v for k, v in violations.items() if k == "budget"},
        "monotonic": {k: v for k, v in violations.items() if k == "monotonic"},
    }
    for name, failed in groups.items():
        if failed:
            key, residual = _worst(failed)
            report.checks.append(
                CheckResult(name=name, passed=False, residual=residual, tolerance=EQUALITY_TOL, detail=key)
            )
        else:
            report.checks.append(CheckResult(name=name, passed=True, residual=0.0, tolerance=EQUALITY_TOL))

    key, residual = _worst(binding_residuals(menu, s))
    report.checks.append(
        CheckResult(
            name="binding",
            passed=abs(residual) <= EQUALITY_TOL,
            residual=residual,
            tolerance=EQUALITY_TOL,
            detail=key,
        )
    )

    kkt = kkt_residuals(menu, s)
    worst_type = int(np.argmax(np.abs(kkt)))
    report.checks.append(
        CheckResult(
            name="stationarity",
            passed=bool(np.max(np.abs(kkt)) <= EQUALITY_TOL),
            residual=float(kkt[worst_type]),
            tolerance=EQUALITY_TOL,
            detail=f"type {worst_type + 1}",
        )
    )

    if s.k > ORACLE_MAX_TYPES:
        report.oracle_skipped = f"oracle skipped: k={s.k} exceeds the oracle limit of {ORACLE_MAX_TYPES}"
        logger.warning("reap.verify.oracle_skipped", k=s.k)
        return report

    run = oracle_complete if menu.regime is Regime.COMPLETE else oracle_incomplete
    result = run(s, config.oracle)
    closed = objective_value(menu, s)
    gap = (result.objective - closed) / closed
    report.oracle_objective = result.objective
    report.checks.append(
        CheckResult(
            name="oracle",
            passed=abs(gap) <= ORACLE_RTOL and result.passes_agree and result.nonmonotone_better == 0,
            residual=gap,
            tolerance=ORACLE_RTOL,
            detail=f"oracle objective {result.objective:.9g} vs menu {closed:.9g}",
        )
    )
    return report


def verify_continuous_menu(
    menu: ContinuousMenu, scenario: ContinuousScenario, seed: int = 0
) -> VerificationReport:
    """IR, top-type IR equality, sampled global IC and budget checks for a contract function.

    Tolerances scale with the largest payment; sampled IC uses the interpolated contract, whose
    error shrinks with the square of the grid spacing.
    """
    grid = np.asarray(menu.grid)
    eps = np.asarray(menu.eps_values)
    pay = np.asarray(menu.pay_values)
    report = VerificationReport(regime=Regime.CONTINUOUS, types=len(grid))
    scale = max(1.0, float(np.max(np.abs(pay))))
    exact_tol = EQUALITY_TOL * scale
    ic_tol = CONTINUOUS_IC_RTOL * scale

    rents = pay - grid * eps
    report.checks.append(
        CheckResult(
            name="ir", passed=bool(rents.min() >= -exact_tol), residual=float(rents.min()), tolerance=exact_tol
        )
    )
    report.checks.append(
        CheckResult(
            name="ir_top", passed=abs(rents[-1]) <= exact_tol, residual=float(rents[-1]), tolerance=exact_tol
        )
    )

    pairs = stream(seed, 0).uniform(menu.theta_low, menu.theta_high, size=(IC_SAMPLE_PAIRS, 2))
    theta, other = pairs[:, 0], pairs[:, 1]
    own = np.interp(theta, grid, pay) - theta * np.interp(theta, grid, eps)
    mimic = np.interp(other, grid, pay) - theta * np.interp(other, grid, eps)
    worst = int(np.argmin(own - mimic))
    slack = float(own[worst] - mimic[worst])
    report.checks.append(
        CheckResult(
            name="ic_sampled",
            passed=slack >= -ic_tol,
            residual=slack,
            tolerance=ic_tol,
            detail=f"theta={theta[worst]:.6g} mimicking {other[worst]:.6g}",
        )
    )

    spent = scenario.n * float(integrate.simpson(pay * scenario.density.pdf(grid), x=grid))
    budget_gap = (scenario.budget - spent) / scenario.budget
    report.checks.append(
        CheckResult(
            name="budget", passed=abs(budget_gap) <= EQUALITY_TOL, residual=budget_gap, tolerance=EQUALITY_TOL
        )
    )
    return report


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def _row(value: float, scenario: DiscreteScenario, **extra: float) -> SweepRow:
    s = scenario.populated()
    complete, incomplete = solve_complete(s), solve_incomplete(s)
    alpha_c, alpha_i = alpha_of_menu(complete, s), alpha_of_menu(incomplete, s)
    return SweepRow(
        value=value,
        alpha_complete=alpha_c,
        alpha_incomplete=alpha_i,
        ratio=alpha_i / alpha_c,
        objective_complete=objective_value(complete, s),
        objective_incomplete=objective_value(incomplete, s),
        **extra,
    )


def budget_sweep(config: ExperimentConfig, budgets: Sequence[float]) -> SweepResult:
    rows = [_row(b, config.discrete_scenario(budget=b)) for b in budgets]
    return SweepResult(parameter=SweepParameter.BUDGET.value, rows=rows)


def k_sweep(config: ExperimentConfig, type_counts: Sequence[int]) -> SweepResult:
    """Evenly spaced types on the configured θ range with λ_i = n/k."""
    rows = [_row(float(k), config.discrete_scenario(k=k)) for k in type_counts]
    return SweepResult(parameter=SweepParameter.K.value, rows=rows)


def lambda_grid(
    lambda1_values: Sequence[float],
    lambda_step: float,
    *,
    thetas: tuple[float, float, float] = FIG2_THETAS,
    population: float = FIG2_POPULATION,
    budget: float = FIG2_BUDGET,
    gamma: float = FIG2_GAMMA,
    delta: float = FIG2_DELTA,
) -> SweepResult:
    """Ratio surface over λ_1 ∈ ``lambda1_values``, λ_2 = 0, step, ..., λ_3 = N − λ_1 − λ_2."""
    rows: list[SweepRow] = []
    for lam1 in lambda1_values:
        if lam1 > population:
            continue
        for lam2 in np.arange(0.0, population - lam1 + lambda_step / 2.0, lambda_step):
            lam3 = max(0.0, population - lam1 - float(lam2))
            scenario = DiscreteScenario(
                budget=budget,
                gamma=gamma,
                delta=delta,
                types=[
                    PuType(theta=thetas[0], lam=lam1),
                    PuType(theta=thetas[1], lam=float(lam2)),
                    PuType(theta=thetas[2], lam=lam3),
                ],
            )
            rows.append(_row(lam1, scenario, lambda_2=float(lam2), lambda_3=lam3))
    return SweepResult(parameter=SweepParameter.LAMBDA_GRID.value, rows=rows)


def run_sweep(config: ExperimentConfig) -> SweepResult:
    """Run the configured sweep.

    Raises:
        ConfigError: If no sweep is configured or a k sweep asks for non-integer type counts.
    """
    spec = config.sweep
    if spec is None:
        raise ConfigError("no sweep configured; set 'sweep' in the config file")
    if spec.parameter is SweepParameter.BUDGET:
        result = budget_sweep(config, spec.values())
    elif spec.parameter is SweepParameter.K:
        values = spec.values()
        counts = [round(v) for v in values]
        if any(abs(c - v) > 1e-9 or c < 1 for c, v in zip(counts, values, strict=True)):
            raise ConfigError(f"k sweep needs positive integer type counts, got {values}")
        result = k_sweep(config, counts)
    else:
        result = lambda_grid(spec.lambda1_values, spec.lambda_step)
    logger.info("reap.sweep.complete", parameter=result.parameter, rows=len(result.rows))
    return result


def sweep_frame(result: SweepResult) -> pd.DataFrame:
    frame = pd.DataFrame([row.model_dump() for row in result.rows])
    if result.parameter == SweepParameter.LAMBDA_GRID.value:
        frame = frame.rename(columns={"value": "lambda1", "lambda_2": "lambda2", "lambda_3": "lambda3"})
        return frame[["lambda1", "lambda2", "lambda3", "ratio", "alpha_complete", "alpha_incomplete"]]
    frame = frame.rename(columns={"value": result.parameter})
    return frame.drop(columns=["lambda_2", "lambda_3"])


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------


def _fig3(config: ExperimentConfig) -> pd.DataFrame:
    s = config.discrete_scenario().populated()
    complete, incomplete = solve_complete(s), solve_incomplete(s)
    return pd.DataFrame(
        {
            "type_index": np.arange(1, s.k + 1),
            "theta": s.thetas,
            "epsilon_complete": complete.epsilons,
            "epsilon_incomplete": incomplete.epsilons,
        }
    )


def _fig4(config: ExperimentConfig) -> pd.DataFrame:
    s = config.discrete_scenario().populated()
    menu = solve_incomplete(s)
    records = [
        {
            "type_index": t,
            "theta": s.types[t - 1].theta,
            "item_index": j + 1,
            "utility": utility(item, s.types[t - 1].theta),
        }
        for t in FIG4_TYPES
        if t <= s.k
        for j, item in enumerate(menu.items)
    ]
    return pd.DataFrame.from_records(records, columns=["type_index", "theta", "item_index", "utility"])


def figure_frame(figure_id: str, config: ExperimentConfig) -> pd.DataFrame:
    """Plot data for one figure.

    Raises:
        ConfigError: If ``figure_id`` is unknown.
    """
    if figure_id == "fig2":
        spec = config.sweep
        if spec is not None and spec.parameter is SweepParameter.LAMBDA_GRID:
            grid = lambda_grid(spec.lambda1_values, spec.lambda_step)
        else:
            grid = lambda_grid([0.0, 50.0, 100.0, 150.0, 200.0, 250.0], 10.0)
        return sweep_frame(grid)[["lambda1", "lambda2", "lambda3", "ratio"]]
    if figure_id == "fig3":
        return _fig3(config)
    if figure_id == "fig4":
        return _fig4(config)
    if figure_id == "fig5":
        return sweep_frame(budget_sweep(config, FIG5_BUDGETS))
    if figure_id == "fig6":
        return sweep_frame(k_sweep(config, FIG6_TYPE_COUNTS))
    raise ConfigError(f"unknown figure id {figure_id!r}; expected one of {', '.join(FIGURE_IDS)}")
