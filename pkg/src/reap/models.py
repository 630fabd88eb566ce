"""Pydantic models for reap.

Shared by every layer: the privacy core (sensing context, Laplace scale, privacy level),
discrete contract menus and their constraint reports, continuous contract functions, oracle
results, and the simulator's agents and reports.

Menus serialize to the JSON documents consumed by the CLI; field aliases (``lambda``,
``epsilon``, ``payment``) are the wire names.
"""

from __future__ import annotations

import json
from enum import StrEnum
from typing import Any

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import integrate, stats

from reap.exceptions import ScenarioError

FloatArray = npt.NDArray[np.float64]

_DENSITY_MASS_TOL = 1e-6

# ---------------------------------------------------------------------------
# Enums
# ---------------------------------------------------------------------------


class Regime(StrEnum):
    """Information regime the fusion center designs a menu under."""

    COMPLETE = "complete"
    INCOMPLETE = "incomplete"
    CONTINUOUS = "continuous"


class DensityKind(StrEnum):
    """Family of a continuous type density."""

    UNIFORM = "uniform"
    TRUNCATED_NORMAL = "truncated_normal"
    TABULATED = "tabulated"


class RawDistributionKind(StrEnum):
    """Distribution of the simulated raw readings."""

    UNIFORM = "uniform"
    BIMODAL = "bimodal"


# ---------------------------------------------------------------------------
# Privacy core
# ---------------------------------------------------------------------------


class SensingContext(BaseModel):
    """Aggregation setting shared by every participatory user."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    gamma: float = Field(gt=0, description="Data range of a reading (units of the sensed quantity).")
    delta: float = Field(ge=0, lt=1, description="Confidence level of the accuracy guarantee.")
    n: int = Field(ge=1, description="Number of participatory users.")


class LaplaceScale(BaseModel):
    """Scale parameter b of a zero-mean Laplace noise distribution."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    b: float = Field(gt=0, description="Laplace scale, same units as the data.")


class PplLevel(BaseModel):
    """Differential-privacy parameter; smaller epsilon means stronger privacy."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    epsilon: float = Field(gt=0)


class PerturbedReading(BaseModel):
    """A raw reading together with its Laplace-perturbed report.

    ``raw`` exists for simulation-side error accounting only; the fusion center sees
    ``noisy``.
    """

    model_config = ConfigDict(frozen=True)

    raw: float
    noisy: float
    scale: LaplaceScale

    @property
    def noise(self) -> float:
        return self.noisy - self.raw


# ---------------------------------------------------------------------------
# Discrete contracts
# ---------------------------------------------------------------------------


class PuType(BaseModel):
    """A privacy-preference level and the number of users holding it.

    A zero population is accepted on input; solvers drop such types.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True, allow_inf_nan=False, extra="forbid")

    theta: float = Field(gt=0, description="Privacy preference, payment units per unit epsilon.")
    lam: float = Field(ge=0, alias="lambda", description="Number of users of this type.")


def _theta_of(entry: Any) -> float | None:
    if isinstance(entry, PuType):
        return entry.theta
    if isinstance(entry, dict):
        value = entry.get("theta")
        if isinstance(value, int | float):
            return float(value)
    return None


class DiscreteScenario(BaseModel):
    """Budget, sensing setting and the type list of a finite-type design problem.

    Types are sorted ascending by theta on construction (stable for ties);
    ``permutation[i]`` is the input position of sorted type ``i``.
    """

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    budget: float = Field(gt=0)
    gamma: float = Field(gt=0)
    delta: float = Field(ge=0, lt=1)
    types: list[PuType] = Field(min_length=1)
    permutation: list[int] = Field(default_factory=list, exclude=True)

    @model_validator(mode="before")
    @classmethod
    def _sort_types(cls, data: Any) -> Any:
        if not isinstance(data, dict) or not isinstance(data.get("types"), list):
            return data
        raw = list(data["types"])
        thetas = [_theta_of(t) for t in raw]
        if any(t is None for t in thetas):
            return data
        order = sorted(range(len(raw)), key=lambda i: (thetas[i], i))
        return {**data, "types": [raw[i] for i in order], "permutation": order}

    @property
    def k(self) -> int:
        return len(self.types)

    @property
    def thetas(self) -> FloatArray:
        return np.array([t.theta for t in self.types], dtype=np.float64)

    @property
    def lambdas(self) -> FloatArray:
        return np.array([t.lam for t in self.types], dtype=np.float64)

    @property
    def population(self) -> float:
        return float(sum(t.lam for t in self.types))

    @property
    def ctx(self) -> SensingContext:
        return SensingContext(gamma=self.gamma, delta=self.delta, n=max(1, round(self.population)))

    def populated(self) -> DiscreteScenario:
        """Return the scenario restricted to types with a positive population.

        Raises:
            ScenarioError: If every population is zero.
        """
        kept = [t for t in self.types if t.lam > 0]
        if not kept:
            raise ScenarioError("every type has zero population", field="types")
        if len(kept) == len(self.types):
            return self
        return DiscreteScenario(budget=self.budget, gamma=self.gamma, delta=self.delta, types=kept)


class ContractItem(BaseModel):
    """One privacy-payment pair offered by the fusion center."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    epsilon: float = Field(gt=0, description="Privacy-preserving level.")
    payment: float = Field(ge=0)


class ContractMenu(BaseModel):
    """A contract menu index-aligned with the (populated, sorted) types it was designed for."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    regime: Regime
    types: list[PuType] = Field(min_length=1)
    items: list[ContractItem] = Field(min_length=1)
    budget: float = Field(gt=0)
    gamma: float = Field(gt=0)
    delta: float = Field(ge=0, lt=1)

    @field_validator("regime")
    @classmethod
    def _discrete_regime(cls, value: Regime) -> Regime:
        if value is Regime.CONTINUOUS:
            raise ValueError("a discrete menu is designed under the complete or incomplete regime")
        return value

    @model_validator(mode="after")
    def _aligned(self) -> ContractMenu:
        if len(self.items) != len(self.types):
            raise ValueError(
                f"items length ({len(self.items)}) must equal types length ({len(self.types)})"
            )
        return self

    @property
    def k(self) -> int:
        return len(self.items)

    @property
    def epsilons(self) -> FloatArray:
        return np.array([item.epsilon for item in self.items], dtype=np.float64)

    @property
    def payments(self) -> FloatArray:
        return np.array([item.payment for item in self.items], dtype=np.float64)

    def scenario(self) -> DiscreteScenario:
        """Rebuild the scenario this menu was designed for."""
        return DiscreteScenario(
            budget=self.budget, gamma=self.gamma, delta=self.delta, types=list(self.types)
        )

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json", by_alias=True), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> ContractMenu:
        return cls.model_validate_json(text)


class ConstraintViolation(BaseModel):
    """A named constraint and its signed residual (negative means violated)."""

    constraint: str
    residual: float


class ConstraintReport(BaseModel):
    """Residuals of every IR, IC, budget and monotonicity condition of a menu.

    ``ic_matrix[i][j]`` is the utility type ``i`` obtains from item ``j``; the diagonal is the
    own-item utility and equals ``ir_residuals``. Identifiers reported by ``violations`` are
    1-based (``ir[1]``, ``ic[2->1]``).
    """

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    ir_residuals: list[float]
    ic_matrix: list[list[float]]
    budget_residual: float
    monotonic: bool
    min_epsilon_step: float = Field(description="min over i of eps_i - eps_{i+1}; 0 for one item.")
    budget: float = Field(gt=0)
    payment_scale: list[float] = Field(
        description="Per-type magnitude max(1, p_i, theta_i eps_i) used for relative tolerances."
    )

    def violations(self, tol: float = 1e-9) -> list[ConstraintViolation]:
        found: list[ConstraintViolation] = []
        k = len(self.ir_residuals)
        for i in range(k):
            scale = self.payment_scale[i]
            if self.ir_residuals[i] < -tol * scale:
                found.append(ConstraintViolation(constraint=f"ir[{i + 1}]", residual=self.ir_residuals[i]))
            own = self.ic_matrix[i][i]
            for j in range(k):
                if j == i:
                    continue
                slack = own - self.ic_matrix[i][j]
                if slack < -tol * scale:
                    found.append(ConstraintViolation(constraint=f"ic[{i + 1}->{j + 1}]", residual=slack))
        if self.budget_residual < -tol * self.budget:
            found.append(ConstraintViolation(constraint="budget", residual=self.budget_residual))
        if not self.monotonic:
            found.append(ConstraintViolation(constraint="monotonic", residual=self.min_epsilon_step))
        return found

    @property
    def satisfied(self) -> bool:
        return not self.violations()


# ---------------------------------------------------------------------------
# Continuous contracts
# ---------------------------------------------------------------------------


class TypeDensity(BaseModel):
    """Density h(θ) of the privacy preference over [theta_low, theta_high].

    ``truncated_normal`` needs ``mean`` and ``std``; ``tabulated`` is the piecewise-linear pdf
    through ``(nodes, values)`` with the cdf obtained by exact trapezoid quadrature.
    """

    model_config = ConfigDict(frozen=True, allow_inf_nan=False, extra="forbid")

    kind: DensityKind = DensityKind.UNIFORM
    theta_low: float = Field(gt=0)
    theta_high: float = Field(gt=0)
    mean: float | None = None
    std: float | None = Field(default=None, gt=0)
    nodes: list[float] | None = None
    values: list[float] | None = None

    @model_validator(mode="after")
    def _check_support(self) -> TypeDensity:
        if self.theta_low >= self.theta_high:
            raise ValueError(
                f"theta_low ({self.theta_low}) must be below theta_high ({self.theta_high})"
            )
        if self.kind is DensityKind.TRUNCATED_NORMAL and (self.mean is None or self.std is None):
            raise ValueError("truncated_normal density requires mean and std")
        if self.kind is DensityKind.TABULATED:
            self._check_table()
        mass = self.total_mass()
        if abs(mass - 1.0) > _DENSITY_MASS_TOL:
            raise ValueError(f"density integrates to {mass:.9g}, expected 1")
        return self

    def _check_table(self) -> None:
        if self.nodes is None or self.values is None:
            raise ValueError("tabulated density requires nodes and values")
        if len(self.nodes) != len(self.values) or len(self.nodes) < 2:
            raise ValueError("nodes and values must have equal length >= 2")
        x = np.asarray(self.nodes)
        if np.any(np.diff(x) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if not (np.isclose(x[0], self.theta_low) and np.isclose(x[-1], self.theta_high)):
            raise ValueError("nodes must span exactly [theta_low, theta_high]")
        if min(self.values) <= 0:
            raise ValueError("tabulated pdf values must be strictly positive on the support")

    def _frozen(self) -> Any:
        scale = self.theta_high - self.theta_low
        if self.kind is DensityKind.UNIFORM:
            return stats.uniform(loc=self.theta_low, scale=scale)
        assert self.mean is not None and self.std is not None
        a = (self.theta_low - self.mean) / self.std
        b = (self.theta_high - self.mean) / self.std
        return stats.truncnorm(a, b, loc=self.mean, scale=self.std)

    def _table(self) -> tuple[FloatArray, FloatArray, FloatArray]:
        assert self.nodes is not None and self.values is not None
        x = np.asarray(self.nodes, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        return x, v, integrate.cumulative_trapezoid(v, x, initial=0.0)

    def total_mass(self) -> float:
        if self.kind is DensityKind.TABULATED:
            return float(self._table()[2][-1])
        return float(self._frozen().cdf(self.theta_high) - self._frozen().cdf(self.theta_low))

    def pdf(self, theta: npt.ArrayLike) -> FloatArray:
        t = np.asarray(theta, dtype=np.float64)
        if self.kind is DensityKind.TABULATED:
            x, v, _ = self._table()
            inside = (t >= self.theta_low) & (t <= self.theta_high)
            return np.where(inside, np.interp(t, x, v), 0.0)
        return np.asarray(self._frozen().pdf(t), dtype=np.float64)

    def cdf(self, theta: npt.ArrayLike) -> FloatArray:
        t = np.clip(np.asarray(theta, dtype=np.float64), self.theta_low, self.theta_high)
        if self.kind is DensityKind.TABULATED:
            x, v, cum = self._table()
            j = np.clip(np.searchsorted(x, t, side="right") - 1, 0, len(x) - 2)
            d = t - x[j]
            slope = (v[j + 1] - v[j]) / (x[j + 1] - x[j])
            return np.asarray(cum[j] + v[j] * d + 0.5 * slope * d * d, dtype=np.float64)
        return np.asarray(self._frozen().cdf(t), dtype=np.float64)

    def ppf(self, u: npt.ArrayLike) -> FloatArray:
        """Inverse cdf, used to sample types."""
        q = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
        if self.kind is DensityKind.TABULATED:
            x, v, cum = self._table()
            target = q * cum[-1]
            j = np.clip(np.searchsorted(cum, target, side="right") - 1, 0, len(x) - 2)
            rest = target - cum[j]
            slope = (v[j + 1] - v[j]) / (x[j + 1] - x[j])
            flat = np.abs(slope) < 1e-14
            safe_slope = np.where(flat, 1.0, slope)
            curved = (-v[j] + np.sqrt(np.maximum(v[j] ** 2 + 2.0 * slope * rest, 0.0))) / safe_slope
            d = np.where(flat, rest / v[j], curved)
            return np.asarray(np.clip(x[j] + d, self.theta_low, self.theta_high), dtype=np.float64)
        return np.asarray(self._frozen().ppf(q), dtype=np.float64)


class ContinuousScenario(BaseModel):
    """Budget, sensing setting and type density of a continuum design problem.

    The budget is total: ``n * ∫ p(θ) h(θ) dθ = budget``.
    """

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    budget: float = Field(gt=0)
    density: TypeDensity
    gamma: float = Field(gt=0)
    delta: float = Field(ge=0, lt=1)
    n: int = Field(ge=1)

    @property
    def ctx(self) -> SensingContext:
        return SensingContext(gamma=self.gamma, delta=self.delta, n=self.n)


class ContinuousMenu(BaseModel):
    """Solved contract function sampled on an ascending grid covering the support."""

    model_config = ConfigDict(frozen=True, populate_by_name=True, allow_inf_nan=False)

    theta_low: float
    theta_high: float
    grid: list[float] = Field(min_length=2)
    eps_values: list[float] = Field(alias="epsilon")
    pay_values: list[float] = Field(alias="payment")
    c1: float
    c2: float
    budget: float = Field(gt=0)

    @model_validator(mode="after")
    def _check_shape(self) -> ContinuousMenu:
        m = len(self.grid)
        if len(self.eps_values) != m or len(self.pay_values) != m:
            raise ValueError("grid, epsilon and payment must have equal length")
        grid = np.asarray(self.grid)
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly ascending")
        eps = np.asarray(self.eps_values)
        if np.any(eps <= 0):
            raise ValueError("epsilon values must be strictly positive")
        if np.any(np.diff(eps) > 1e-12 * eps[:-1]):
            raise ValueError("epsilon values must be non-increasing across the grid")
        return self

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json", by_alias=True), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> ContinuousMenu:
        return cls.model_validate_json(text)


# ---------------------------------------------------------------------------
# Oracle
# ---------------------------------------------------------------------------


class OracleSettings(BaseModel):
    """Grid-search controls for the brute-force oracles."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    grid_points_per_dim: int = Field(default=200, ge=2)
    refinement_rounds: int = Field(default=3, gt=0)
    feasibility_tol: float = Field(default=1e-7, gt=0)
    active_tol: float = Field(default=1e-3, gt=0, description="Relative slack below which a constraint is reported tight.")
    unrestricted_points_per_dim: int = Field(
        default=9, ge=2, description="Coarse (ε, p) grid resolution of the inequality-form pass."
    )
    nonmonotone_samples: int = Field(default=2000, ge=0)


class OracleResult(BaseModel):
    """Best feasible grid point found by an oracle."""

    menu: ContractMenu
    objective: float
    feasible: bool
    active_constraints: list[str] = Field(
        default_factory=list, description="Constraints tight at the inequality-form optimum."
    )
    unrestricted_objective: float | None = Field(
        default=None, description="Objective of the (ε, p) search over the unreduced constraint set."
    )
    passes_agree: bool = Field(
        default=True, description="Inequality-form objective within 1e-3 relative of the grid objective."
    )
    nonmonotone_better: int = Field(
        default=0, description="Sampled non-monotone ε tuples that beat the incumbent (expected 0)."
    )


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


class RawDataModel(BaseModel):
    """Distribution of raw readings; ``high`` defaults to the data range γ."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: RawDistributionKind = RawDistributionKind.UNIFORM
    low: float = 0.0
    high: float | None = None


class Agent(BaseModel):
    """A participatory user holding one reading."""

    model_config = ConfigDict(frozen=True)

    id: int = Field(ge=0)
    theta: float = Field(gt=0)
    raw_reading: float
    type_index: int | None = Field(default=None, description="Sorted type index (discrete only).")


class RoundResult(BaseModel):
    """One reporting round: selections, noisy reports and the aggregation error."""

    chosen_index: list[int] = Field(description="Menu item per agent; -1 for continuous menus.")
    reports: list[float]
    s_true: float
    s_hat: float
    signed_error: float = Field(description="Mean of the injected noise.")
    abs_error: float
    total_payment: float


class MonteCarloReport(BaseModel):
    """Empirical accuracy of a menu against its predicted α."""

    trials: int = Field(ge=1)
    predicted_alpha: float
    violation_rate: float = Field(ge=0, le=1)
    mean_abs_error: float
    error_quantiles: list[float]
    quantile_levels: list[float]
    delta: float
    chebyshev_bound: float = Field(description="1 - delta")
    binomial_se: float
    within_bound: bool = Field(description="violation_rate <= 1 - delta + 3 binomial standard errors")


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


class SweepRow(BaseModel):
    value: float
    alpha_complete: float
    alpha_incomplete: float
    ratio: float
    objective_complete: float
    objective_incomplete: float
    lambda_2: float | None = None
    lambda_3: float | None = None


class SweepResult(BaseModel):
    """Rows of one parameter sweep, in input order."""

    parameter: str
    rows: list[SweepRow]
