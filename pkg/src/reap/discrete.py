"""discrete.py — Closed-form optimal contract menus for finitely many user types.

Complete information (the fusion center observes every type):

    ε_i = B·θ_i^(−1/3) / Σ_j λ_j θ_j^(2/3),    p_i = θ_i ε_i

Incomplete information (only the type distribution is known). With types sorted ascending,
Δθ_i = θ_i − θ_(i−1) and

    H_1 = λ_1 θ_1,    H_i = λ_i θ_i + Δθ_i · Σ_(j<i) λ_j

the menu is ε_i = G·(λ_i / H_i)^(1/3) with G = B / Σ_j H_j^(2/3) λ_j^(1/3), and payments follow
the binding chain p_k = θ_k ε_k, p_i = p_(i+1) + θ_i (ε_i − ε_(i+1)). Under this chain the budget
spent is Σ λ_i p_i = Σ H_i ε_i, so r_i = H_i / λ_i is each type's per-capita virtual cost.

When r is not non-decreasing the formula above breaks monotonicity (and global IC); adjacent
types are then pooled by weighted isotonic regression of r, and pooled types share an item.
For non-decreasing r the pooled solution is the formula above unchanged.

Types with zero population are dropped before solving; menus list populated types only.
"""

from __future__ import annotations

import numpy as np
import structlog
from scipy.optimize import isotonic_regression

from reap.exceptions import DomainError
from reap.models import (
    ConstraintReport,
    ContractItem,
    ContractMenu,
    DiscreteScenario,
    FloatArray,
    Regime,
)
from reap.privacy import accuracy_from_weights

logger: structlog.BoundLogger = structlog.get_logger(__name__)

_MONOTONE_RTOL = 1e-12


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _menu(
    regime: Regime, scenario: DiscreteScenario, eps: FloatArray, pay: FloatArray
) -> ContractMenu:
    return ContractMenu(
        regime=regime,
        types=list(scenario.types),
        items=[
            ContractItem(epsilon=float(e), payment=float(max(p, 0.0)))
            for e, p in zip(eps, pay, strict=True)
        ],
        budget=scenario.budget,
        gamma=scenario.gamma,
        delta=scenario.delta,
    )


def _aligned(menu: ContractMenu, scenario: DiscreteScenario) -> DiscreteScenario:
    populated = scenario.populated()
    if populated.k != menu.k:
        raise DomainError(
            f"menu has {menu.k} items but the scenario has {populated.k} populated types",
            field="menu",
        )
    return populated


def information_weights(scenario: DiscreteScenario) -> FloatArray:
    """Return H_i for the populated, sorted types."""
    s = scenario.populated()
    theta, lam = s.thetas, s.lambdas
    dtheta = np.diff(theta, prepend=theta[0])
    below = np.concatenate(([0.0], np.cumsum(lam)[:-1]))
    return np.asarray(lam * theta + dtheta * below, dtype=np.float64)


def virtual_costs(scenario: DiscreteScenario) -> FloatArray:
    """Return r_i = H_i / λ_i for the populated, sorted types."""
    return information_weights(scenario) / scenario.populated().lambdas


def ironed_virtual_costs(scenario: DiscreteScenario) -> FloatArray:
    """Virtual costs made non-decreasing by pooling adjacent types (weights λ)."""
    s = scenario.populated()
    r = virtual_costs(s)
    if np.all(np.diff(r) >= 0):
        return r
    return np.asarray(isotonic_regression(r, weights=s.lambdas, increasing=True).x)


# ---------------------------------------------------------------------------
# Public interface
# ---------------------------------------------------------------------------


def utility(item: ContractItem, theta: float) -> float:
    """Utility p − θ·ε of a user with preference ``theta`` for ``item``."""
    return item.payment - theta * item.epsilon


def solve_complete(scenario: DiscreteScenario) -> ContractMenu:
    """Optimal menu when the fusion center observes every user's type."""
    s = scenario.populated()
    theta, lam = s.thetas, s.lambdas
    denom = float(np.sum(lam * np.cbrt(theta) ** 2))
    eps = s.budget / (np.cbrt(theta) * denom)
    pay = theta * eps
    logger.debug("reap.discrete.complete.solved", k=s.k, budget=s.budget)
    return _menu(Regime.COMPLETE, s, eps, pay)


def solve_incomplete(scenario: DiscreteScenario) -> ContractMenu:
    """Optimal self-selecting menu when only the type distribution is known."""
    s = scenario.populated()
    theta = s.thetas
    weights = information_weights(s)
    r = virtual_costs(s)
    r_ironed = ironed_virtual_costs(s)
    if not np.array_equal(r, r_ironed):
        logger.warning(
            "reap.discrete.incomplete.ironed",
            k=s.k,
            pooled_types=int(np.sum(r != r_ironed)),
        )

    shape = 1.0 / np.cbrt(r_ironed)
    G = s.budget / float(np.sum(weights * shape))
    eps = G * shape

    # p_i = θ_i ε_i + Σ_(j>i) Δθ_j ε_j
    dtheta = np.diff(theta)
    tail = np.concatenate((np.cumsum((dtheta * eps[1:])[::-1])[::-1], [0.0]))
    pay = theta * eps + tail

    logger.debug("reap.discrete.incomplete.solved", k=s.k, budget=s.budget, G=G)
    return _menu(Regime.INCOMPLETE, s, eps, pay)


def solve(scenario: DiscreteScenario, regime: Regime) -> ContractMenu:
    """Dispatch to the closed-form solver for ``regime``."""
    if regime is Regime.COMPLETE:
        return solve_complete(scenario)
    if regime is Regime.INCOMPLETE:
        return solve_incomplete(scenario)
    raise DomainError(f"no discrete solver for regime {regime}", field="regime")


def check_constraints(menu: ContractMenu, scenario: DiscreteScenario) -> ConstraintReport:
    """Evaluate every IR, IC, budget and monotonicity condition of ``menu``.

    Raises:
        DomainError: If the menu and the populated scenario types are not aligned.
    """
    s = _aligned(menu, scenario)
    theta, lam = s.thetas, s.lambdas
    eps, pay = menu.epsilons, menu.payments

    ic = pay[np.newaxis, :] - theta[:, np.newaxis] * eps[np.newaxis, :]
    steps = eps[:-1] - eps[1:]
    monotonic = bool(np.all(steps >= -_MONOTONE_RTOL * eps[:-1]))
    scale = np.maximum(1.0, np.maximum(np.abs(pay), theta * eps))
    return ConstraintReport(
        ir_residuals=np.diag(ic).tolist(),
        ic_matrix=ic.tolist(),
        budget_residual=float(s.budget - np.sum(lam * pay)),
        monotonic=monotonic,
        min_epsilon_step=float(steps.min()) if steps.size else 0.0,
        budget=s.budget,
        payment_scale=scale.tolist(),
    )


def binding_residuals(menu: ContractMenu, scenario: DiscreteScenario) -> dict[str, float]:
    """Relative residuals of the equalities the regime's optimum satisfies.

    Complete: ``budget`` and every ``ir[i]``. Incomplete: ``budget``, top-type ``ir[k]`` and
    each adjacent downward ``ic[i->i+1]``. Keys use 1-based type indices.
    """
    s = _aligned(menu, scenario)
    theta, lam = s.thetas, s.lambdas
    eps, pay = menu.epsilons, menu.payments
    scale = np.maximum(1.0, np.maximum(np.abs(pay), theta * eps))

    out = {"budget": float((s.budget - np.sum(lam * pay)) / s.budget)}
    ir = (pay - theta * eps) / scale
    if menu.regime is Regime.COMPLETE:
        out.update({f"ir[{i + 1}]": float(v) for i, v in enumerate(ir)})
        return out
    out[f"ir[{s.k}]"] = float(ir[-1])
    for i in range(s.k - 1):
        own = pay[i] - theta[i] * eps[i]
        down = pay[i + 1] - theta[i] * eps[i + 1]
        out[f"ic[{i + 1}->{i + 2}]"] = float((own - down) / scale[i])
    return out


def information_rents(menu: ContractMenu, scenario: DiscreteScenario) -> FloatArray:
    """Own-item utility of each type; zero for the top type of an incomplete menu."""
    return np.asarray(check_constraints(menu, scenario).ir_residuals)


def objective_value(menu: ContractMenu, scenario: DiscreteScenario) -> float:
    """Return Σ λ_i / ε_i², the scale-free surrogate the fusion center minimises."""
    s = _aligned(menu, scenario)
    return float(np.sum(s.lambdas / menu.epsilons**2))


def alpha_of_menu(menu: ContractMenu, scenario: DiscreteScenario) -> float:
    """Predicted α when type i's ε is used by λ_i users (n = Σ λ_i)."""
    s = _aligned(menu, scenario)
    return accuracy_from_weights(s.gamma, s.delta, s.population, objective_value(menu, s))


def accuracy_ratio(scenario: DiscreteScenario) -> float:
    """α_incomplete / α_complete; at least 1, and exactly 1 for a single populated type."""
    s = scenario.populated()
    return alpha_of_menu(solve_incomplete(s), s) / alpha_of_menu(solve_complete(s), s)
