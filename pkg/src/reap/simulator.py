"""simulator.py — Agent-based reporting rounds and Monte Carlo accuracy checks.

One round: the fusion center broadcasts a menu, every agent takes an item, perturbs its
reading with Laplace(0, γ/ε) noise and reports; the fusion center averages the reports.

Item choice depends on the regime the menu was designed under:
  - complete:   the fusion center knows each type and assigns the type's own item
  - incomplete: agents self-select the utility-maximising item (``select_item``)
  - continuous: agents evaluate the contract function at their own θ

Random streams are derived from ``(seed, stream, index)`` via ``SeedSequence`` spawn keys, so a
trial's noise does not depend on how many trials run or in which order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
import structlog

from reap.continuous import eval_menu
from reap.exceptions import DomainError, ScenarioError
from reap.models import (
    Agent,
    ContinuousMenu,
    ContinuousScenario,
    ContractMenu,
    DiscreteScenario,
    FloatArray,
    MonteCarloReport,
    PplLevel,
    RawDataModel,
    RawDistributionKind,
    Regime,
    RoundResult,
    SensingContext,
)
from reap.privacy import laplace_noise, predicted_accuracy

logger: structlog.BoundLogger = structlog.get_logger(__name__)

Scenario = DiscreteScenario | ContinuousScenario
Menu = ContractMenu | ContinuousMenu

RAW_STREAM = 0
THETA_STREAM = 1
NOISE_STREAM = 2

QUANTILE_LEVELS = (0.5, 0.9, 0.95, 0.99)
TRIAL_COLUMNS = ["trial", "s_true", "s_hat", "abs_error", "total_payment"]

_TIE_RTOL = 1e-9
_BIMODAL_CLUSTER = 0.25


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


# ---------------------------------------------------------------------------
# Population
# ---------------------------------------------------------------------------


def _raw_readings(
    model: RawDataModel, gamma: float, size: int, rng: np.random.Generator
) -> FloatArray:
    low = model.low
    high = gamma if model.high is None else model.high
    if not high > low:
        raise DomainError(f"raw range [{low}, {high}] is empty", field="raw_data")
    if model.kind is RawDistributionKind.UNIFORM:
        return rng.uniform(low, high, size)
    cluster = _BIMODAL_CLUSTER * (high - low)
    lower = rng.random(size) < 0.5
    near_low = rng.uniform(low, low + cluster, size)
    near_high = rng.uniform(high - cluster, high, size)
    return np.where(lower, near_low, near_high)


def build_population(
    scenario: Scenario, raw: RawDataModel | None = None, seed: int = 0
) -> list[Agent]:
    """Instantiate agents for a scenario.

    Discrete scenarios get round(λ_i) agents of type i; continuous scenarios draw n types from
    the density by inverse cdf. Raw readings are i.i.d. from ``raw`` (uniform on [0, γ] by
    default).

    Raises:
        ScenarioError: If the rounded populations do not sum to the scenario's n.
    """
    raw = raw or RawDataModel()
    if isinstance(scenario, ContinuousScenario):
        n = scenario.n
        thetas = scenario.density.ppf(stream(seed, THETA_STREAM).random(n))
        readings = _raw_readings(raw, scenario.gamma, n, stream(seed, RAW_STREAM))
        return [
            Agent(id=i, theta=float(t), raw_reading=float(d))
            for i, (t, d) in enumerate(zip(thetas, readings, strict=True))
        ]

    s = scenario.populated()
    counts = np.rint(s.lambdas).astype(int)
    if int(counts.sum()) != s.ctx.n:
        raise ScenarioError(
            f"rounded populations sum to {int(counts.sum())}, expected n={s.ctx.n}",
            field="types",
        )
    readings = _raw_readings(raw, s.gamma, int(counts.sum()), stream(seed, RAW_STREAM))
    agents: list[Agent] = []
    for type_index, (pu, count) in enumerate(zip(s.types, counts, strict=True)):
        for _ in range(count):
            agent_id = len(agents)
            agents.append(
                Agent(
                    id=agent_id,
                    theta=pu.theta,
                    raw_reading=float(readings[agent_id]),
                    type_index=type_index,
                )
            )
    logger.debug("reap.simulator.population", agents=len(agents), types=s.k)
    return agents


# ---------------------------------------------------------------------------
# Item choice
# ---------------------------------------------------------------------------


def select_item(theta: float, menu: ContractMenu) -> int:
    """Index of the utility-maximising item for a user with preference ``theta``.

    Utilities within a relative 1e-9 of the best count as ties; ties go to the larger ε (the
    item designed for the user's own type at a binding IC), then to the lower index.
    """
    eps, pay = menu.epsilons, menu.payments
    u = pay - theta * eps
    best = float(u.max())
    tol = _TIE_RTOL * max(1.0, float(np.max(np.abs(pay))), theta * float(eps.max()))
    candidates = np.flatnonzero(u >= best - tol)
    return int(candidates[np.argmax(eps[candidates])])


@dataclass(frozen=True)
class _Choice:
    index: np.ndarray
    eps: FloatArray
    pay: FloatArray


def _choose(agents: list[Agent], menu: Menu) -> _Choice:
    if not agents:
        raise DomainError("at least one agent is required", field="agents")
    if isinstance(menu, ContinuousMenu):
        items = [eval_menu(menu, a.theta) for a in agents]
        return _Choice(
            index=np.full(len(agents), -1),
            eps=np.array([it.epsilon for it in items]),
            pay=np.array([it.payment for it in items]),
        )

    if menu.regime is Regime.COMPLETE:
        index = np.array([_assigned(a, menu) for a in agents])
    else:
        picks: dict[float, int] = {}
        for a in agents:
            if a.theta not in picks:
                picks[a.theta] = select_item(a.theta, menu)
        index = np.array([picks[a.theta] for a in agents])
    return _Choice(index=index, eps=menu.epsilons[index], pay=menu.payments[index])


def _assigned(agent: Agent, menu: ContractMenu) -> int:
    if agent.type_index is not None and agent.type_index < menu.k:
        return agent.type_index
    for j, pu in enumerate(menu.types):
        if pu.theta == agent.theta:
            return j
    raise DomainError(
        f"agent {agent.id} (theta={agent.theta}) matches no type of the complete menu",
        field="agents",
    )


# ---------------------------------------------------------------------------
# Rounds and Monte Carlo
# ---------------------------------------------------------------------------


def run_round(
    agents: list[Agent],
    menu: Menu,
    scenario: Scenario,
    seed: int,
    *,
    trial: int = 0,
    zero_noise: bool = False,
) -> RoundResult:
    """Play one reporting round.

    Args:
        agents: Population with fixed raw readings.
        menu: Discrete menu or continuous contract function.
        scenario: Supplies γ for noise calibration.
        seed: Master seed; the round's noise stream is ``(seed, NOISE_STREAM, trial)``.
        trial: Trial index within a Monte Carlo run.
        zero_noise: Force η = 0 for every agent (test hook).
    """
    choice = _choose(agents, menu)
    raws = np.array([a.raw_reading for a in agents])
    scales = scenario.gamma / choice.eps
    noise = (
        np.zeros_like(scales)
        if zero_noise
        else laplace_noise(scales, stream(seed, NOISE_STREAM, trial))
    )
    reports = raws + noise
    signed = float(noise.mean())
    return RoundResult(
        chosen_index=choice.index.tolist(),
        reports=reports.tolist(),
        s_true=float(raws.mean()),
        s_hat=float(reports.mean()),
        signed_error=signed,
        abs_error=abs(signed),
        total_payment=float(choice.pay.sum()),
    )


@dataclass(frozen=True)
class MonteCarloRun:
    """Summary report plus the per-trial table (columns ``TRIAL_COLUMNS``)."""

    report: MonteCarloReport
    trials: pd.DataFrame


def simulate(
    agents: list[Agent], menu: Menu, scenario: Scenario, trials: int, seed: int
) -> MonteCarloRun:
    """Run ``trials`` rounds with fresh noise and fixed raw readings.

    Raises:
        DomainError: If ``trials`` is below 1.
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}", field="trials")
    choice = _choose(agents, menu)
    raws = np.array([a.raw_reading for a in agents])
    scales = scenario.gamma / choice.eps
    s_true = float(raws.mean())
    total_payment = float(choice.pay.sum())

    ctx = SensingContext(gamma=scenario.gamma, delta=scenario.delta, n=len(agents))
    alpha = predicted_accuracy(ctx, [PplLevel(epsilon=float(e)) for e in choice.eps])

    s_hat = np.empty(trials)
    abs_error = np.empty(trials)
    for t in range(trials):
        noise = laplace_noise(scales, stream(seed, NOISE_STREAM, t))
        s_hat[t] = float((raws + noise).mean())
        abs_error[t] = abs(float(noise.mean()))

    bound = 1.0 - scenario.delta
    binomial_se = float(np.sqrt(bound * (1.0 - bound) / trials))
    violation_rate = float(np.mean(abs_error >= alpha))
    report = MonteCarloReport(
        trials=trials,
        predicted_alpha=alpha,
        violation_rate=violation_rate,
        mean_abs_error=float(abs_error.mean()),
        error_quantiles=np.quantile(abs_error, QUANTILE_LEVELS).tolist(),
        quantile_levels=list(QUANTILE_LEVELS),
        delta=scenario.delta,
        chebyshev_bound=bound,
        binomial_se=binomial_se,
        within_bound=violation_rate <= bound + 3.0 * binomial_se,
    )
    table = pd.DataFrame(
        {
            "trial": np.arange(trials),
            "s_true": np.full(trials, s_true),
            "s_hat": s_hat,
            "abs_error": abs_error,
            "total_payment": np.full(trials, total_payment),
        },
        columns=TRIAL_COLUMNS,
    )
    logger.info(
        "reap.simulator.monte_carlo.complete",
        trials=trials,
        predicted_alpha=alpha,
        violation_rate=violation_rate,
        bound=bound,
    )
    return MonteCarloRun(report=report, trials=table)


def monte_carlo(
    agents: list[Agent], menu: Menu, scenario: Scenario, trials: int, seed: int
) -> MonteCarloReport:
    """Empirical accuracy of ``menu`` over ``trials`` rounds."""
    return simulate(agents, menu, scenario, trials, seed).report
