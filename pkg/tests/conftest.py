from __future__ import annotations

from pathlib import Path

import pytest

from campaignopt.control import ControlBudget, quadratic_cost
from campaignopt.model import ConstantRate, EpidemicParams
from campaignopt.sweep import SweepConfig, solve_optimal

U_MAX = 0.06
HORIZON = 5.0
BUDGET = U_MAX**2 * HORIZON / 8


@pytest.fixture(autouse=True)
def isolate_test_environment(monkeypatch, tmp_path: Path):
    # Default output paths are relative to the working directory.
    monkeypatch.chdir(tmp_path)


@pytest.fixture(scope="session")
def reference_budget() -> ControlBudget:
    return ControlBudget(cost=quadratic_cost(), u_max=U_MAX, B=BUDGET)


@pytest.fixture(scope="session")
def strong_params() -> EpidemicParams:
    return EpidemicParams(profile=ConstantRate(1.2), gamma=0.1, alpha=0.5, s0=0.01, T=HORIZON)


@pytest.fixture(scope="session")
def mild_params() -> EpidemicParams:
    return EpidemicParams(profile=ConstantRate(0.2), gamma=0.1, alpha=0.5, s0=0.01, T=HORIZON)


@pytest.fixture(scope="session")
def direct_sweep_config() -> SweepConfig:
    # Direct replacement of the control on every sweep.
    return SweepConfig(relaxation=1.0)


@pytest.fixture(scope="session")
def strong_solution(strong_params, reference_budget, direct_sweep_config):
    return solve_optimal(strong_params, reference_budget, direct_sweep_config)


@pytest.fixture(scope="session")
def mild_solution(mild_params, reference_budget, direct_sweep_config):
    return solve_optimal(mild_params, reference_budget, direct_sweep_config)


@pytest.fixture(scope="session")
def strong_relaxed_solution(strong_params, reference_budget):
    # theta = 0.5 settles to a fixed point on the strong case.
    return solve_optimal(strong_params, reference_budget, SweepConfig(relaxation=0.5))
