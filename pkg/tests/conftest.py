"""Shared pytest fixtures for the reap test suite."""

from __future__ import annotations

from collections.abc import Iterator

import pytest

from reap.discrete import solve_complete, solve_incomplete
from reap.logging_setup import reset_logging
from reap.models import ContractMenu, DiscreteScenario
from tests.helpers import make_scenario, make_table_scenario


@pytest.fixture(autouse=True)
def _fresh_logging() -> Iterator[None]:
    yield
    reset_logging()


@pytest.fixture
def worked_scenario() -> DiscreteScenario:
    return make_scenario()


@pytest.fixture
def worked_menu(worked_scenario: DiscreteScenario) -> ContractMenu:
    return solve_incomplete(worked_scenario)


@pytest.fixture
def worked_complete_menu(worked_scenario: DiscreteScenario) -> ContractMenu:
    return solve_complete(worked_scenario)


@pytest.fixture
def table_scenario() -> DiscreteScenario:
    return make_table_scenario()


@pytest.fixture
def irregular_scenario() -> DiscreteScenario:
    """Middle type nearly empty: virtual costs are not monotone and must be pooled."""
    return make_scenario(thetas=(1.0, 2.0, 3.0), lambdas=(100.0, 1.0, 100.0), budget=1000.0)
