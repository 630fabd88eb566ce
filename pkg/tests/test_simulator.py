"""Agent-based simulation tests for reap.simulator."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np
import pandas as pd
import pytest

from reap import simulator
from reap.config import ExperimentConfig
from reap.continuous import solve_continuous
from reap.discrete import solve, solve_complete, solve_incomplete
from reap.exceptions import DomainError, ScenarioError
from reap.models import ContractMenu, DiscreteScenario, RawDataModel, RawDistributionKind, Regime
from reap.simulator import (
    TRIAL_COLUMNS,
    build_population,
    monte_carlo,
    run_round,
    select_item,
    simulate,
)
from tests.helpers import make_continuous, make_scenario


class TestBuildPopulation:
    """Unit tests for build_population()."""

    def test_counts_follow_lambda(self, table_scenario: DiscreteScenario) -> None:
        agents = build_population(table_scenario, seed=1)
        assert len(agents) == 200
        counts = np.bincount([a.type_index for a in agents if a.type_index is not None])
        assert counts.tolist() == [10] * 20

    def test_readings_in_data_range(self, table_scenario: DiscreteScenario) -> None:
        readings = [a.raw_reading for a in build_population(table_scenario, seed=2)]
        assert min(readings) >= 0.0
        assert max(readings) <= table_scenario.gamma

    def test_same_seed_same_population(self, table_scenario: DiscreteScenario) -> None:
        assert build_population(table_scenario, seed=5) == build_population(table_scenario, seed=5)
        assert build_population(table_scenario, seed=5) != build_population(table_scenario, seed=6)

    def test_bimodal_readings_avoid_the_middle(self, table_scenario: DiscreteScenario) -> None:
        raw = RawDataModel(kind=RawDistributionKind.BIMODAL)
        readings = np.array([a.raw_reading for a in build_population(table_scenario, raw, seed=3)])
        assert not np.any((readings > 2.5) & (readings < 7.5))

    def test_rounding_mismatch_raises(self) -> None:
        with pytest.raises(ScenarioError):
            build_population(make_scenario(lambdas=(1.5, 1.5)))

    def test_continuous_types_lie_in_support(self) -> None:
        agents = build_population(make_continuous(n=50), seed=4)
        thetas = np.array([a.theta for a in agents])
        assert len(agents) == 50
        assert thetas.min() >= 5.0 and thetas.max() <= 15.0
        assert all(a.type_index is None for a in agents)


class TestSelectItem:
    """Unit tests for select_item()."""

    def test_low_outsider_takes_first_item(self, worked_menu: ContractMenu) -> None:
        assert select_item(0.5, worked_menu) == 0

    def test_binding_tie_goes_to_own_item(self, worked_menu: ContractMenu) -> None:
        assert select_item(1.0, worked_menu) == 0
        assert select_item(2.0, worked_menu) == 1

    def test_every_type_picks_its_own_item(self, table_scenario: DiscreteScenario) -> None:
        menu = solve_incomplete(table_scenario)
        picks = [select_item(t, menu) for t in table_scenario.thetas]
        assert picks == list(range(table_scenario.k))

    def test_each_distinct_theta_is_resolved_once(
        self, table_scenario: DiscreteScenario, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        calls: list[float] = []

        def counting(theta: float, menu: ContractMenu) -> int:
            calls.append(theta)
            return select_item(theta, menu)

        monkeypatch.setattr(simulator, "select_item", counting)
        agents = build_population(table_scenario, seed=0)
        result = run_round(agents, solve_incomplete(table_scenario), table_scenario, 0)
        assert sorted(calls) == sorted({a.theta for a in agents})
        assert result.chosen_index == [a.type_index for a in agents]


class TestRunRound:
    """Unit tests for run_round()."""

    def test_zero_noise_recovers_the_mean(self, table_scenario: DiscreteScenario) -> None:
        agents = build_population(table_scenario, seed=0)
        result = run_round(agents, solve_incomplete(table_scenario), table_scenario, 0, zero_noise=True)
        assert result.s_hat == pytest.approx(result.s_true)
        assert result.abs_error == 0.0

    def test_payments_stay_within_budget(self, table_scenario: DiscreteScenario) -> None:
        agents = build_population(table_scenario, seed=0)
        result = run_round(agents, solve_incomplete(table_scenario), table_scenario, 0)
        assert result.total_payment <= table_scenario.budget * (1.0 + 1e-9)

    @pytest.mark.parametrize("solver", [solve_complete, solve_incomplete])
    def test_population_spends_the_whole_budget(
        self, table_scenario: DiscreteScenario, solver: Callable[[DiscreteScenario], ContractMenu]
    ) -> None:
        agents = build_population(table_scenario, seed=0)
        result = run_round(agents, solver(table_scenario), table_scenario, 0)
        assert result.total_payment == pytest.approx(table_scenario.budget, rel=1e-9)

    def test_complete_regime_assigns_own_item(self, table_scenario: DiscreteScenario) -> None:
        agents = build_population(table_scenario, seed=0)
        result = run_round(agents, solve_complete(table_scenario), table_scenario, 0)
        assert result.chosen_index == [a.type_index for a in agents]

    def test_signed_error_is_noise_mean(self, table_scenario: DiscreteScenario) -> None:
        agents = build_population(table_scenario, seed=0)
        result = run_round(agents, solve_incomplete(table_scenario), table_scenario, 3, trial=2)
        assert result.signed_error == pytest.approx(result.s_hat - result.s_true)
        assert result.abs_error == pytest.approx(abs(result.signed_error))

    def test_continuous_menu(self) -> None:
        s = make_continuous(n=40)
        agents = build_population(s, seed=0)
        result = run_round(agents, solve_continuous(s, 64), s, 0)
        assert result.chosen_index == [-1] * 40
        assert result.total_payment > 0

    def test_empty_population_raises(self, worked_menu: ContractMenu, worked_scenario: DiscreteScenario) -> None:
        with pytest.raises(DomainError):
            run_round([], worked_menu, worked_scenario, 0)


class TestMonteCarlo:
    """Unit tests for monte_carlo()."""

    def test_violation_rate_within_chebyshev_bound(self, table_scenario: DiscreteScenario) -> None:
        agents = build_population(table_scenario, seed=0)
        report = monte_carlo(agents, solve_incomplete(table_scenario), table_scenario, 2000, 0)
        assert report.within_bound
        assert report.violation_rate <= 0.1
        assert report.chebyshev_bound == pytest.approx(0.1)
        assert report.error_quantiles == sorted(report.error_quantiles)

    @pytest.mark.parametrize("delta", [0.5, 0.99])
    @pytest.mark.parametrize("regime", ["complete", "incomplete"])
    def test_violation_rate_within_bound_across_confidence(self, delta: float, regime: str) -> None:
        s = ExperimentConfig(delta=delta).discrete_scenario()
        menu = solve(s, Regime(regime))
        report = monte_carlo(build_population(s, seed=0), menu, s, 2000, 0)
        assert report.chebyshev_bound == pytest.approx(1.0 - delta)
        assert report.within_bound
        assert report.violation_rate <= 1.0 - delta + 3.0 * report.binomial_se

    def test_raw_distribution_does_not_change_the_error(
        self, table_scenario: DiscreteScenario
    ) -> None:
        menu = solve_incomplete(table_scenario)
        uniform, bimodal = (
            simulate(
                build_population(table_scenario, RawDataModel(kind=kind), seed=0),
                menu,
                table_scenario,
                50,
                3,
            ).trials
            for kind in (RawDistributionKind.UNIFORM, RawDistributionKind.BIMODAL)
        )
        np.testing.assert_array_equal(uniform["abs_error"], bimodal["abs_error"])
        assert uniform["s_true"].iloc[0] != bimodal["s_true"].iloc[0]

    def test_same_seed_same_table(self, table_scenario: DiscreteScenario) -> None:
        agents = build_population(table_scenario, seed=0)
        menu = solve_incomplete(table_scenario)
        first = simulate(agents, menu, table_scenario, 50, 9).trials
        second = simulate(agents, menu, table_scenario, 50, 9).trials
        pd.testing.assert_frame_equal(first, second)
        assert list(first.columns) == TRIAL_COLUMNS

    def test_trial_noise_does_not_depend_on_trial_count(self, table_scenario: DiscreteScenario) -> None:
        agents = build_population(table_scenario, seed=0)
        menu = solve_incomplete(table_scenario)
        short = simulate(agents, menu, table_scenario, 5, 1).trials
        long = simulate(agents, menu, table_scenario, 20, 1).trials
        pd.testing.assert_frame_equal(short, long.iloc[:5])

    def test_round_matches_trial_row(self, table_scenario: DiscreteScenario) -> None:
        agents = build_population(table_scenario, seed=0)
        menu = solve_incomplete(table_scenario)
        table = simulate(agents, menu, table_scenario, 3, 4).trials
        result = run_round(agents, menu, table_scenario, 4, trial=2)
        assert table.loc[2, "s_hat"] == pytest.approx(result.s_hat)

    def test_zero_trials_raises(self, worked_menu: ContractMenu) -> None:
        s = make_scenario(lambdas=(1.0, 1.0))
        with pytest.raises(DomainError):
            simulate(build_population(s), worked_menu, s, 0, 0)

    @pytest.mark.slow
    def test_table_defaults_ten_thousand_trials(self, table_scenario: DiscreteScenario) -> None:
        agents = build_population(table_scenario, seed=0)
        report = monte_carlo(agents, solve_incomplete(table_scenario), table_scenario, 10_000, 0)
        assert report.violation_rate <= 0.1 + 3.0 * report.binomial_se
