"""continuous.py — Optimal contract function for a continuum of user types.

Stationarity of the Hamiltonian in the control ε(θ), with the budget co-state constant c1 and
the utility co-state c1·H(θ) − c2, gives

    ε(θ)³ = 2h(θ) / (c1·(θ h(θ) + H(θ)) − c2)

The utility state is free at θ_low, so its co-state vanishes there and c2 = c1·H(θ_low) = 0.
Hence ε(θ) = (2/c1)^(1/3) · v(θ)^(−1/3) with the virtual type v(θ) = θ + H(θ)/h(θ), and c1 is
the root of the budget equality n·∫ p h = B. Payments keep the top type at zero utility:

    p(θ) = θ ε(θ) + ∫_θ^θ̄ ε(τ) dτ

Densities whose virtual type is not non-decreasing produce a non-monotone ε and are rejected.
All integrals use composite Simpson on a uniform grid.
"""

from __future__ import annotations

import math

import numpy as np
import structlog
from scipy import integrate, optimize

from reap.exceptions import ContinuousSolverError, DomainError
from reap.models import (
    ContinuousMenu,
    ContinuousScenario,
    ContractItem,
    DiscreteScenario,
    FloatArray,
    PuType,
)
from reap.privacy import accuracy_from_weights

logger: structlog.BoundLogger = structlog.get_logger(__name__)

MIN_GRID_SIZE = 64
_REFINE_RTOL = 1e-6
_BRACKET_EXPANSIONS = 60
_SUPPORT_RTOL = 1e-12


def virtual_type(scenario: ContinuousScenario, grid: FloatArray) -> FloatArray:
    """v(θ) = θ + H(θ)/h(θ) on ``grid``.

    Raises:
        ContinuousSolverError: If the density vanishes on the grid.
    """
    h = scenario.density.pdf(grid)
    if np.any(h <= 0):
        where = float(grid[int(np.argmax(h <= 0))])
        raise ContinuousSolverError(f"density vanishes at theta={where:.6g}")
    return np.asarray(grid + scenario.density.cdf(grid) / h, dtype=np.float64)


def _payments(grid: FloatArray, eps: FloatArray) -> FloatArray:
    cumulative = integrate.cumulative_simpson(eps, x=grid, initial=0.0)
    return np.asarray(grid * eps + (cumulative[-1] - cumulative), dtype=np.float64)


def _solve_on_grid(scenario: ContinuousScenario, intervals: int) -> ContinuousMenu:
    density = scenario.density
    grid = np.linspace(density.theta_low, density.theta_high, intervals + 1)
    h = density.pdf(grid)
    shape = virtual_type(scenario, grid) ** (-1.0 / 3.0)

    if not np.all(np.isfinite(shape)) or np.any(shape <= 0):
        raise ContinuousSolverError("contract function is non-positive on the grid")
    rising = np.flatnonzero(np.diff(shape) > 1e-12 * shape[:-1])
    if rising.size:
        where = float(grid[rising[0]])
        raise ContinuousSolverError(
            f"contract function increases near theta={where:.6g}; "
            "the density's virtual type is not monotone"
        )

    # Spending is linear in the (2/c1)^(1/3) scale, so solve on log c1.
    unit_spend = scenario.n * float(integrate.simpson(_payments(grid, shape) * h, x=grid))
    if not (math.isfinite(unit_spend) and unit_spend > 0):
        raise ContinuousSolverError(f"budget integral is not positive ({unit_spend})")

    def budget_gap(log_c1: float) -> float:
        return (math.log(2.0) - log_c1) / 3.0 + math.log(unit_spend) - math.log(scenario.budget)

    lo, hi = -1.0, 1.0
    for _ in range(_BRACKET_EXPANSIONS):
        if budget_gap(lo) * budget_gap(hi) <= 0:
            break
        lo, hi = lo - 2.0 * (hi - lo), hi + 2.0 * (hi - lo)
    else:
        raise ContinuousSolverError("could not bracket c1 on the budget equality")
    log_c1 = optimize.brentq(budget_gap, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)

    c1 = math.exp(log_c1)
    eps = (2.0 / c1) ** (1.0 / 3.0) * shape
    pay = _payments(grid, eps)
    return ContinuousMenu(
        theta_low=density.theta_low,
        theta_high=density.theta_high,
        grid=grid.tolist(),
        eps_values=eps.tolist(),
        pay_values=pay.tolist(),
        c1=c1,
        c2=c1 * float(density.cdf(density.theta_low)),
        budget=scenario.budget,
    )


# ---------------------------------------------------------------------------
# Public interface
# ---------------------------------------------------------------------------


def solve_continuous(
    scenario: ContinuousScenario,
    grid_size: int = 512,
    *,
    max_grid_size: int | None = None,
) -> ContinuousMenu:
    """Solve for (ε*(θ), p*(θ)) on a uniform grid.

    The grid starts at ``grid_size`` intervals and doubles until the objective moves by less
    than 1e-6 relative or ``max_grid_size`` (default ``8 * grid_size``) would be exceeded; the
    finest menu computed is returned.

    Raises:
        DomainError: If ``grid_size`` is below 64 or above the cap.
        ContinuousSolverError: If c1 cannot be bracketed or ε is non-positive or non-monotone.
    """
    if grid_size < MIN_GRID_SIZE:
        raise DomainError(f"grid_size must be >= {MIN_GRID_SIZE}, got {grid_size}", field="grid_size")
    cap = 8 * grid_size if max_grid_size is None else max_grid_size
    if cap < grid_size:
        raise DomainError(f"max_grid_size ({cap}) is below grid_size ({grid_size})", field="max_grid_size")

    intervals = grid_size
    menu = _solve_on_grid(scenario, intervals)
    objective = objective_continuous(menu, scenario)
    while 2 * intervals <= cap:
        intervals *= 2
        finer = _solve_on_grid(scenario, intervals)
        finer_objective = objective_continuous(finer, scenario)
        change = abs(finer_objective - objective) / objective
        menu, objective = finer, finer_objective
        logger.debug("reap.continuous.refine", intervals=intervals, change=change)
        if change < _REFINE_RTOL:
            break

    logger.info(
        "reap.continuous.solved",
        intervals=len(menu.grid) - 1,
        c1=menu.c1,
        objective=objective,
        density=scenario.density.kind.value,
    )
    return menu


def eval_menu(menu: ContinuousMenu, theta: float) -> ContractItem:
    """Piecewise-linear (hence monotone) interpolation of the contract at ``theta``.

    Raises:
        DomainError: If ``theta`` lies outside the menu's support.
    """
    slack = _SUPPORT_RTOL * max(1.0, abs(menu.theta_high))
    if not (menu.theta_low - slack <= theta <= menu.theta_high + slack):
        raise DomainError(
            f"theta={theta} outside support [{menu.theta_low}, {menu.theta_high}]", field="theta"
        )
    eps = float(np.interp(theta, menu.grid, menu.eps_values))
    pay = float(np.interp(theta, menu.grid, menu.pay_values))
    return ContractItem(epsilon=eps, payment=max(pay, 0.0))


def objective_continuous(menu: ContinuousMenu, scenario: ContinuousScenario) -> float:
    """Per-capita objective ∫ h/ε² over the support."""
    grid = np.asarray(menu.grid)
    eps = np.asarray(menu.eps_values)
    return float(integrate.simpson(scenario.density.pdf(grid) / eps**2, x=grid))


def alpha_of_continuous_menu(menu: ContinuousMenu, scenario: ContinuousScenario) -> float:
    """Predicted α for n users whose types follow the scenario density."""
    n = scenario.n
    return accuracy_from_weights(
        scenario.gamma, scenario.delta, n, n * objective_continuous(menu, scenario)
    )


def discretize_density(scenario: ContinuousScenario, k: int) -> DiscreteScenario:
    """Split the support into ``k`` equal-width cells with λ_i = n·∫_cell h.

    Each cell is represented by its upper edge, the highest type inside it, so a contract
    designed for the representative is individually rational for the whole cell.
    """
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}", field="k")
    density = scenario.density
    edges = np.linspace(density.theta_low, density.theta_high, k + 1)
    mass = np.diff(density.cdf(edges))
    types = [
        PuType(theta=float(theta), lam=float(scenario.n * m))
        for theta, m in zip(edges[1:], mass, strict=True)
    ]
    return DiscreteScenario(
        budget=scenario.budget, gamma=scenario.gamma, delta=scenario.delta, types=types
    )
