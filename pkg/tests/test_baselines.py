from __future__ import annotations

import numpy as np
import pytest

from campaignopt.baselines import evaluate_strategy, no_control, static_control, static_level
from campaignopt.control import ControlBudget, quadratic_cost
from campaignopt.integrator import TimeGrid, integrate_forward

GRID = TimeGrid(5.0, 1000)


def test_static_level_spends_the_budget(reference_budget) -> None:
    assert static_level(reference_budget, 5.0) == pytest.approx(np.sqrt(0.00225 / 5.0))
    u = static_control(reference_budget, 5.0, GRID)
    assert np.all(u.values == u.values[0])


def test_static_spend_curve_is_linear(strong_params, reference_budget) -> None:
    state = integrate_forward(strong_params, static_control(reference_budget, 5.0, GRID), GRID)
    assert state.b[-1] == pytest.approx(reference_budget.B, rel=1e-12)
    assert np.allclose(state.b, reference_budget.B * GRID.times / 5.0, rtol=0, atol=1e-15)


def test_static_control_infeasible_above_cap() -> None:
    # B/T above c(u_max) cannot be met by a constant admissible level.
    budget = ControlBudget(cost=quadratic_cost(), u_max=0.01, B=0.00225)
    with pytest.raises(ValueError, match="static control infeasible"):
        static_control(budget, 5.0, GRID)


def test_reference_baseline_costs(strong_params, mild_params, reference_budget) -> None:
    j_static, spend = evaluate_strategy(strong_params, static_control(reference_budget, 5.0, GRID), GRID)
    j_none, zero_spend = evaluate_strategy(strong_params, no_control(GRID), GRID)
    assert j_static == pytest.approx(0.0909, abs=2e-3)
    assert j_none == pytest.approx(0.2150, abs=2e-3)
    assert spend == pytest.approx(reference_budget.B, rel=1e-12)
    assert zero_spend == 0.0

    j_static, _ = evaluate_strategy(mild_params, static_control(reference_budget, 5.0, GRID), GRID)
    j_none, _ = evaluate_strategy(mild_params, no_control(GRID), GRID)
    assert j_static == pytest.approx(0.8178, abs=2e-3)
    assert j_none == pytest.approx(0.9733, abs=2e-3)


def test_zero_budget_static_equals_no_control(strong_params) -> None:
    budget = ControlBudget(cost=quadratic_cost(), u_max=0.06, B=0.0)
    j_static, _ = evaluate_strategy(strong_params, static_control(budget, 5.0, GRID), GRID)
    j_none, _ = evaluate_strategy(strong_params, no_control(GRID), GRID)
    assert j_static == j_none
