"""oracle.py — Brute-force re-derivation of optimal menus on small instances.

The oracles search privacy levels directly against the constraint inequalities and never use
the closed forms, so agreement with ``reap.discrete`` validates both the formulas and the
constraint reductions behind them.

  oracle_complete    — ε grid with every IR tight, cross-checked by an (ε, p) search on the
                       inequality form p_i >= θ_i ε_i
  oracle_incomplete  — monotone ε tuples with the binding IC chain for payments, filtered by
                       the full IR + IC + budget set; cross-checked by an (ε, p) search on the
                       full inequality set and a spot check of non-monotone ε tuples
  kkt_residuals      — relative stationarity residuals of any menu

The ε box comes from the inequalities alone: IR and the budget give λ_i θ_i ε_i <= B, and under
IC every strictly lower type is paid at least θ_i ε_i. Round 0 spans the box geometrically.
Each later round searches a geometric window around the incumbent that shrinks 5×, or doubles
when the incumbent sits on the window edge. Ties on the objective go to the lexicographically
smallest ε tuple.

The inequality-form pass starts from the best point of a coarse (ε, p) grid and is polished with
SLSQP. Its constraints are linear and the objective is convex, so the polished point is the
optimum of the unreduced problem. ``active_constraints`` lists the constraints tight there.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable

import numpy as np
import structlog
from scipy import optimize

from reap.discrete import information_weights
from reap.exceptions import DomainError, OracleError
from reap.models import (
    ContractItem,
    ContractMenu,
    DiscreteScenario,
    FloatArray,
    OracleResult,
    OracleSettings,
    Regime,
)

logger: structlog.BoundLogger = structlog.get_logger(__name__)

ORACLE_MAX_TYPES = 3
_WINDOW_SHRINK = 5.0
_FIRST_WINDOW_CELLS = 12
_GRID_FLOOR = 1e-6
_COARSE_FLOOR = 1e-3
_AGREEMENT_RTOL = 1e-3
_NONMONOTONE_SEED = 0
_POOL_RTOL = 1e-12

# Maps an (m, k) block of ε tuples to (objective, payments, feasible mask).
Evaluator = Callable[[FloatArray], tuple[FloatArray, FloatArray, np.ndarray]]


# ---------------------------------------------------------------------------
# Constraint evaluation (vectorised over candidate points)
# ---------------------------------------------------------------------------


def _feasible(
    scenario: DiscreteScenario,
    eps: FloatArray,
    pay: FloatArray,
    tol: float,
    *,
    incentive: bool = True,
) -> np.ndarray:
    """IR + budget filter for (m, k) blocks of ε and p; ``incentive`` adds every pairwise IC."""
    theta, lam = scenario.thetas, scenario.lambdas
    # u[m, i, j] = p_j − θ_i ε_j
    u = pay[:, np.newaxis, :] - theta[np.newaxis, :, np.newaxis] * eps[:, np.newaxis, :]
    own = np.diagonal(u, axis1=1, axis2=2)
    scale = np.maximum(1.0, np.maximum(np.abs(pay), theta * eps))
    ok = np.all(own >= -tol * scale, axis=1) & (pay @ lam <= scenario.budget * (1.0 + tol))
    if incentive:
        ok &= np.all(own[:, :, np.newaxis] - u >= -tol * scale[:, :, np.newaxis], axis=(1, 2))
    return np.asarray(ok)


def _objective(scenario: DiscreteScenario, eps: FloatArray) -> FloatArray:
    return np.asarray((scenario.lambdas / eps**2).sum(axis=1))


def _epsilon_upper(scenario: DiscreteScenario, *, incentive: bool) -> FloatArray:
    """Largest ε_i any point satisfying the inequalities can hold."""
    theta, lam = scenario.thetas, scenario.lambdas
    if not incentive:
        return np.asarray(scenario.budget / (lam * theta))
    lower = np.array([lam[theta < t].sum() for t in theta])
    return np.asarray(scenario.budget / (theta * (lam + lower)))


def _chain_payments(scenario: DiscreteScenario, eps: FloatArray) -> FloatArray:
    """Payments binding the top IR and every adjacent downward IC."""
    theta = scenario.thetas
    pay = np.empty_like(eps)
    pay[:, -1] = theta[-1] * eps[:, -1]
    for i in range(eps.shape[1] - 2, -1, -1):
        pay[:, i] = pay[:, i + 1] + theta[i] * (eps[:, i] - eps[:, i + 1])
    return pay


def _complete_evaluator(scenario: DiscreteScenario, tol: float) -> Evaluator:
    def evaluate(eps: FloatArray) -> tuple[FloatArray, FloatArray, np.ndarray]:
        pay = eps * scenario.thetas
        ok = _feasible(scenario, eps, pay, tol, incentive=False)
        return _objective(scenario, eps), pay, ok

    return evaluate


def _incomplete_evaluator(scenario: DiscreteScenario, tol: float) -> Evaluator:
    def evaluate(eps: FloatArray) -> tuple[FloatArray, FloatArray, np.ndarray]:
        monotone = np.all(np.diff(eps, axis=1) <= 0, axis=1)
        pay = _chain_payments(scenario, eps)
        return _objective(scenario, eps), pay, monotone & _feasible(scenario, eps, pay, tol)

    return evaluate


def _cartesian(axes: list[FloatArray]) -> FloatArray:
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))


# ---------------------------------------------------------------------------
# Grid search
# ---------------------------------------------------------------------------


def _better(obj: float, eps: FloatArray, best_obj: float, best_eps: FloatArray | None) -> bool:
    if best_eps is None or obj < best_obj:
        return True
    return obj == best_obj and tuple(eps) < tuple(best_eps)


def _search_round(
    axes: list[FloatArray], evaluate: Evaluator
) -> tuple[float, FloatArray | None, FloatArray | None]:
    best_obj, best_eps, best_pay = np.inf, None, None
    rest = np.meshgrid(*axes[1:], indexing="ij") if len(axes) > 1 else []
    rest_flat = [r.ravel() for r in rest]
    for first in axes[0]:
        m = rest_flat[0].size if rest_flat else 1
        eps = np.column_stack([np.full(m, first), *rest_flat])
        obj, pay, ok = evaluate(eps)
        if not np.any(ok):
            continue
        idx = np.flatnonzero(ok)
        cand, cand_obj = eps[idx], obj[idx]
        # primary key: objective, then ε lexicographically
        order = np.lexsort((*[cand[:, d] for d in reversed(range(cand.shape[1]))], cand_obj))
        pick = idx[order[0]]
        if _better(float(obj[pick]), eps[pick], best_obj, best_eps):
            best_obj, best_eps, best_pay = float(obj[pick]), eps[pick].copy(), pay[pick].copy()
    return best_obj, best_eps, best_pay


def _refined_search(
    evaluate: Evaluator, upper: FloatArray, settings: OracleSettings
) -> tuple[float, FloatArray, FloatArray]:
    points = settings.grid_points_per_dim
    floor = upper * _GRID_FLOOR
    span = float(np.log(1.0 / _GRID_FLOOR))
    lo, hi = floor.copy(), upper.copy()
    half = np.full(upper.shape, span / 2.0)

    best_obj, best_eps, best_pay = np.inf, None, None
    for round_no in range(settings.refinement_rounds + 1):
        axes = [np.geomspace(lo[d], hi[d], points) for d in range(upper.size)]
        obj, eps, pay = _search_round(axes, evaluate)
        if eps is not None and _better(obj, eps, best_obj, best_eps):
            best_obj, best_eps, best_pay = obj, eps, pay
        if best_eps is None:
            raise OracleError(
                f"no feasible grid point in round {round_no}; check the scenario scale"
            )
        logger.debug("reap.oracle.round", round=round_no, objective=best_obj)

        if round_no == 0:
            half = np.full(upper.shape, _FIRST_WINDOW_CELLS * span / (points - 1))
        else:
            on_edge = (np.isclose(best_eps, lo, rtol=1e-12, atol=0.0) & (lo > floor)) | (
                np.isclose(best_eps, hi, rtol=1e-12, atol=0.0) & (hi < upper)
            )
            half = np.where(on_edge, np.minimum(2.0 * half, span / 2.0), half / _WINDOW_SHRINK)
        lo = np.maximum(best_eps * np.exp(-half), floor)
        hi = np.minimum(best_eps * np.exp(half), upper)
    assert best_eps is not None and best_pay is not None
    return best_obj, best_eps, best_pay


# ---------------------------------------------------------------------------
# Inequality-form cross-check
# ---------------------------------------------------------------------------


def _polish(
    scenario: DiscreteScenario,
    eps0: FloatArray,
    pay0: FloatArray,
    *,
    incentive: bool,
) -> tuple[FloatArray, FloatArray]:
    """SLSQP over (ε, p) scaled to the IR + budget box, every constraint an inequality."""
    theta, lam, k = scenario.thetas, scenario.lambdas, scenario.k
    pay_hi = scenario.budget / lam
    eps_hi = pay_hi / theta
    f0 = float(np.sum(lam / eps0**2))

    def fun(z: FloatArray) -> float:
        return float(np.sum(lam / (eps_hi * z[:k]) ** 2)) / f0

    def jac(z: FloatArray) -> FloatArray:
        grad = np.zeros(2 * k)
        grad[:k] = -2.0 * lam / (eps_hi**2 * z[:k] ** 3) / f0
        return grad

    # Scaled so that θ_i·eps_hi_i == pay_hi_i: IR_i reads y_i − x_i >= 0.
    rows: list[FloatArray] = []
    for i in range(k):
        row = np.zeros(2 * k)
        row[i], row[k + i] = -1.0, 1.0
        rows.append(row)
    if incentive:
        for i, j in itertools.permutations(range(k), 2):
            row = np.zeros(2 * k)
            row[i] -= pay_hi[i]
            row[k + i] += pay_hi[i]
            row[j] += theta[i] * eps_hi[j]
            row[k + j] -= pay_hi[j]
            rows.append(row / np.max(np.abs(row)))
    budget_row = np.zeros(2 * k)
    budget_row[k:] = -1.0
    rows.append(budget_row)
    lower = np.zeros(len(rows))
    lower[-1] = -1.0

    result = optimize.minimize(
        fun,
        np.concatenate([eps0 / eps_hi, pay0 / pay_hi]),
        jac=jac,
        method="SLSQP",
        bounds=optimize.Bounds(np.r_[np.full(k, 1e-12), np.zeros(k)], np.ones(2 * k)),
        constraints=[optimize.LinearConstraint(np.array(rows), lower, np.inf)],
        options={"ftol": 1e-14, "maxiter": 1000},
    )
    logger.debug("reap.oracle.polish", success=bool(result.success), message=str(result.message))
    return np.asarray(eps_hi * result.x[:k]), np.asarray(pay_hi * result.x[k:])


def _inequality_form_optimum(
    scenario: DiscreteScenario, settings: OracleSettings, *, incentive: bool
) -> tuple[float, FloatArray, FloatArray]:
    """Best (ε, p) of the unreduced problem: coarse grid, then SLSQP from its incumbent."""
    theta, lam, k = scenario.thetas, scenario.lambdas, scenario.k
    tol = settings.feasibility_tol
    n = settings.unrestricted_points_per_dim
    upper = _epsilon_upper(scenario, incentive=incentive)
    eps_grid = _cartesian([np.geomspace(e * _COARSE_FLOOR, e, n) for e in upper])
    # rent p_i − θ_i ε_i; zero keeps IR-tight points on the grid
    rent_hi = scenario.budget / lam
    rent_grid = _cartesian(
        [np.concatenate(([0.0], np.geomspace(r * _COARSE_FLOOR**2, r, n - 1))) for r in rent_hi]
    )

    # every type on the top type's item at half the budget is always feasible
    best_eps = np.full(k, 0.5 * scenario.budget / (theta[-1] * lam.sum()))
    best_pay = theta[-1] * best_eps
    best_obj = float(_objective(scenario, best_eps[np.newaxis])[0])
    for eps_row, obj in zip(eps_grid, _objective(scenario, eps_grid), strict=True):
        if obj >= best_obj:
            continue
        block = np.broadcast_to(eps_row, rent_grid.shape)
        pay_grid = theta * block + rent_grid
        ok = _feasible(scenario, block, pay_grid, tol, incentive=incentive)
        if np.any(ok):
            best_obj, best_eps, best_pay = float(obj), eps_row, pay_grid[int(np.argmax(ok))]

    eps, pay = _polish(scenario, best_eps, best_pay, incentive=incentive)
    polished = float(_objective(scenario, eps[np.newaxis])[0])
    ok_polished = bool(
        _feasible(scenario, eps[np.newaxis], pay[np.newaxis], tol, incentive=incentive)[0]
    )
    if ok_polished and polished < best_obj:
        return polished, eps, pay
    logger.warning(
        "reap.oracle.polish_rejected", feasible=ok_polished, polished=polished, grid=best_obj
    )
    return best_obj, best_eps, best_pay


def _nonmonotone_better(
    scenario: DiscreteScenario, incumbent: float, settings: OracleSettings
) -> int:
    if scenario.k < 2 or settings.nonmonotone_samples == 0:
        return 0
    rng = np.random.default_rng(_NONMONOTONE_SEED)
    upper = _epsilon_upper(scenario, incentive=True)
    exponents = rng.uniform(
        np.log(_GRID_FLOOR), 0.0, size=(settings.nonmonotone_samples, scenario.k)
    )
    eps = np.exp(exponents) * upper
    eps = eps[np.any(np.diff(eps, axis=1) > 0, axis=1)]
    pay = _chain_payments(scenario, eps)
    ok = _feasible(scenario, eps, pay, settings.feasibility_tol)
    better = _objective(scenario, eps) < incumbent * (1.0 - _AGREEMENT_RTOL)
    return int(np.sum(ok & better))


def _active_constraints(
    scenario: DiscreteScenario,
    eps: FloatArray,
    pay: FloatArray,
    tol: float,
    *,
    incentive: bool,
) -> list[str]:
    theta, lam = scenario.thetas, scenario.lambdas
    scale = np.maximum(1.0, np.maximum(np.abs(pay), theta * eps))
    active: list[str] = []
    if abs(scenario.budget - float(pay @ lam)) / scenario.budget <= tol:
        active.append("budget")
    own = pay - theta * eps
    for i in range(scenario.k):
        if abs(own[i]) / scale[i] <= tol:
            active.append(f"ir[{i + 1}]")
    if incentive:
        for i, j in itertools.permutations(range(scenario.k), 2):
            if abs(own[i] - (pay[j] - theta[i] * eps[j])) / scale[i] <= tol:
                active.append(f"ic[{i + 1}->{j + 1}]")
    return active


def _result(
    regime: Regime,
    scenario: DiscreteScenario,
    objective: float,
    eps: FloatArray,
    pay: FloatArray,
    cross_check: tuple[float, FloatArray, FloatArray],
    settings: OracleSettings,
    *,
    nonmonotone_better: int = 0,
) -> OracleResult:
    incentive = regime is not Regime.COMPLETE
    unrestricted, u_eps, u_pay = cross_check
    agree = abs(unrestricted - objective) <= _AGREEMENT_RTOL * objective
    if not agree or nonmonotone_better:
        logger.warning(
            "reap.oracle.disagreement",
            regime=regime.value,
            objective=objective,
            unrestricted=unrestricted,
            nonmonotone_better=nonmonotone_better,
        )
    menu = ContractMenu(
        regime=regime,
        types=list(scenario.types),
        items=[
            ContractItem(epsilon=float(e), payment=float(p))
            for e, p in zip(eps, pay, strict=True)
        ],
        budget=scenario.budget,
        gamma=scenario.gamma,
        delta=scenario.delta,
    )
    feasible = _feasible(
        scenario, eps[np.newaxis], pay[np.newaxis], settings.feasibility_tol, incentive=incentive
    )
    return OracleResult(
        menu=menu,
        objective=objective,
        feasible=bool(feasible[0]),
        active_constraints=_active_constraints(
            scenario, u_eps, u_pay, settings.active_tol, incentive=incentive
        ),
        unrestricted_objective=unrestricted,
        passes_agree=agree,
        nonmonotone_better=nonmonotone_better,
    )


def _populated_small(scenario: DiscreteScenario) -> DiscreteScenario:
    s = scenario.populated()
    if s.k > ORACLE_MAX_TYPES:
        raise OracleError(f"oracle supports at most {ORACLE_MAX_TYPES} types, got {s.k}")
    return s


# ---------------------------------------------------------------------------
# Public interface
# ---------------------------------------------------------------------------


def oracle_complete(
    scenario: DiscreteScenario, settings: OracleSettings | None = None
) -> OracleResult:
    """Grid-search the complete-information problem (k <= 3).

    The ε search holds every IR tight; the inequality-form pass leaves payments free above
    θ_i ε_i and must land on the same objective.

    Raises:
        OracleError: If k exceeds the oracle limit or no grid point is feasible.
    """
    settings = settings or OracleSettings()
    s = _populated_small(scenario)
    objective, eps, pay = _refined_search(
        _complete_evaluator(s, settings.feasibility_tol),
        _epsilon_upper(s, incentive=False),
        settings,
    )
    cross_check = _inequality_form_optimum(s, settings, incentive=False)
    logger.info("reap.oracle.complete", k=s.k, objective=objective, unrestricted=cross_check[0])
    return _result(Regime.COMPLETE, s, objective, eps, pay, cross_check, settings)


def oracle_incomplete(
    scenario: DiscreteScenario, settings: OracleSettings | None = None
) -> OracleResult:
    """Grid-search the incomplete-information problem against the full constraint set (k <= 3).

    Raises:
        OracleError: If k exceeds the oracle limit or no grid point is feasible.
    """
    settings = settings or OracleSettings()
    s = _populated_small(scenario)
    objective, eps, pay = _refined_search(
        _incomplete_evaluator(s, settings.feasibility_tol),
        _epsilon_upper(s, incentive=True),
        settings,
    )
    cross_check = _inequality_form_optimum(s, settings, incentive=True)
    beaten = _nonmonotone_better(s, objective, settings)
    logger.info("reap.oracle.incomplete", k=s.k, objective=objective, unrestricted=cross_check[0])
    return _result(
        Regime.INCOMPLETE, s, objective, eps, pay, cross_check, settings, nonmonotone_better=beaten
    )


def kkt_residuals(menu: ContractMenu, scenario: DiscreteScenario) -> FloatArray:
    """Relative stationarity residual α·w_i·ε_i³ / (2λ_i) − 1 per type.

    w_i is λ_i θ_i for complete menus and H_i for incomplete ones. The multiplier comes from
    the aggregate identity α = 2 Σ λ_i/ε_i² / Σ w_i ε_i. Consecutive incomplete items with equal
    ε form a pool and share the pool's residual.

    Raises:
        DomainError: If the menu and the populated scenario types are not aligned.
    """
    s = scenario.populated()
    if s.k != menu.k:
        raise DomainError(
            f"menu has {menu.k} items but the scenario has {s.k} populated types", field="menu"
        )
    lam, eps = s.lambdas, menu.epsilons
    weights = s.lambdas * s.thetas if menu.regime is Regime.COMPLETE else information_weights(s)
    alpha = 2.0 * float(np.sum(lam / eps**2)) / float(np.sum(weights * eps))

    starts = [0]
    if menu.regime is Regime.INCOMPLETE:
        starts += [
            i + 1
            for i in range(s.k - 1)
            if not np.isclose(eps[i], eps[i + 1], rtol=_POOL_RTOL, atol=0.0)
        ]
    else:
        starts = list(range(s.k))
    bounds = [*starts, s.k]

    residuals = np.empty(s.k)
    for a, b in itertools.pairwise(bounds):
        pool_eps = float(np.mean(eps[a:b]))
        pool_lam = float(np.sum(lam[a:b]))
        pool_w = float(np.sum(weights[a:b]))
        residuals[a:b] = alpha * pool_w * pool_eps**3 / (2.0 * pool_lam) - 1.0
    return residuals
