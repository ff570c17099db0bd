from __future__ import annotations

import numpy as np
import pytest

from campaignopt.control import ControlSignal, quadratic_cost
from campaignopt.errors import IntegrationError
from campaignopt.integrator import (
    TimeGrid,
    integrate_adjoint_backward,
    integrate_forward,
    integrate_uncontrolled_full,
)
from campaignopt.model import ConstantRate, EpidemicParams


def _params(beta: float, gamma: float = 0.1, alpha: float = 0.5, T: float = 5.0) -> EpidemicParams:
    return EpidemicParams(profile=ConstantRate(beta), gamma=gamma, alpha=alpha, s0=0.01, T=T)


def test_time_grid_nodes_and_midpoints() -> None:
    grid = TimeGrid(5.0, 4)
    assert grid.h == pytest.approx(1.25)
    assert grid.times.tolist() == [0.0, 1.25, 2.5, 3.75, 5.0]
    assert grid.midpoints.tolist() == [0.625, 1.875, 3.125, 4.375]
    with pytest.raises(ValueError):
        TimeGrid(0.0, 10)
    with pytest.raises(ValueError):
        TimeGrid(5.0, 0)


def test_no_control_matches_logistic_closed_form() -> None:
    # gamma = 0 and u = 0 reduce to di/dt = -beta i (1 - i).
    beta, s0 = 1.2, 0.01
    p = _params(beta, gamma=0.0)
    grid = TimeGrid(5.0, 1000)
    state = integrate_forward(p, ControlSignal.constant(grid, 0.0), grid)
    t = grid.times
    expected = (1 - s0) / ((1 - s0) + s0 * np.exp(beta * t))
    assert np.max(np.abs(state.i - expected)) < 1e-9


def test_forward_initial_values_and_spend_channel() -> None:
    p = _params(1.2)
    grid = TimeGrid(5.0, 200)
    state = integrate_forward(p, ControlSignal.constant(grid, 0.06), grid, quadratic_cost())
    assert state.i[0] == pytest.approx(0.99)
    assert state.s[0] == pytest.approx(0.01)
    assert state.b[0] == 0.0
    assert state.b[-1] == pytest.approx(0.018, rel=1e-12)
    assert np.all(np.diff(state.b) >= 0)
    assert not state.has_adjoints


def test_reduced_representation_conserves_exactly() -> None:
    p = _params(1.2)
    grid = TimeGrid(5.0, 1000)
    state = integrate_forward(p, ControlSignal.constant(grid, 0.03), grid)
    assert np.max(np.abs(state.i + state.s + state.r - 1.0)) < 1e-12
    assert np.all(state.r >= -1e-12)


def test_three_compartment_integration_conserves_population() -> None:
    grid = TimeGrid(5.0, 1000)
    i, s, r = integrate_uncontrolled_full(_params(1.2), grid)
    assert np.max(np.abs(i + s + r - 1.0)) < 1e-7
    reduced = integrate_forward(_params(1.2), ControlSignal.constant(grid, 0.0), grid)
    assert np.max(np.abs(i - reduced.i)) < 1e-9


def test_rk4_is_fourth_order() -> None:
    p = _params(1.2)
    terminal = []
    for n_steps in (40, 80, 160):
        grid = TimeGrid(5.0, n_steps)
        terminal.append(integrate_forward(p, ControlSignal.constant(grid, 0.0), grid).terminal_ignorants)
    ratio = (terminal[0] - terminal[1]) / (terminal[1] - terminal[2])
    assert 12.0 <= ratio <= 20.0


def test_no_control_reference_value() -> None:
    grid = TimeGrid(5.0, 1000)
    state = integrate_forward(_params(1.2), ControlSignal.constant(grid, 0.0), grid)
    assert state.terminal_ignorants == pytest.approx(0.2150, abs=2e-3)


def test_control_grid_must_match() -> None:
    p = _params(1.2)
    with pytest.raises(ValueError, match="grid"):
        integrate_forward(p, ControlSignal.constant(TimeGrid(5.0, 10), 0.0), TimeGrid(5.0, 20))


def test_coarse_step_is_reported() -> None:
    # h = 5 with beta = 40 overshoots the simplex on the first step.
    p = _params(40.0, gamma=0.0)
    grid = TimeGrid(5.0, 1)
    with pytest.raises(IntegrationError, match="step size"):
        integrate_forward(p, ControlSignal.constant(grid, 0.0), grid)


def test_adjoint_terminal_values_and_zero_control() -> None:
    p = _params(1.2)
    grid = TimeGrid(5.0, 500)
    u = ControlSignal.constant(grid, 0.0)
    state = integrate_adjoint_backward(p, u, integrate_forward(p, u, grid), grid)
    assert state.has_adjoints
    assert state.lam_i[-1] == 1.0
    assert state.lam_s[-1] == 0.0
    assert np.all(np.isfinite(state.lam_i))


def test_adjoint_without_spreading_has_closed_form() -> None:
    # beta = gamma = 0: lam_s stays 0 and lam_i(t) = exp(-u (T - t)).
    p = _params(0.0, gamma=0.0)
    grid = TimeGrid(5.0, 500)
    u = ControlSignal.constant(grid, 0.04)
    state = integrate_adjoint_backward(p, u, integrate_forward(p, u, grid), grid)
    assert np.max(np.abs(state.lam_s)) == 0.0
    expected = np.exp(-0.04 * (5.0 - grid.times))
    assert np.max(np.abs(state.lam_i - expected)) < 1e-10


def test_adjoint_with_no_control_and_no_spreading_is_constant() -> None:
    p = _params(0.0, gamma=0.0)
    grid = TimeGrid(5.0, 50)
    u = ControlSignal.constant(grid, 0.0)
    state = integrate_adjoint_backward(p, u, integrate_forward(p, u, grid), grid)
    assert np.all(state.lam_i == 1.0)
    assert np.all(state.lam_s == 0.0)


def test_ignorants_frozen_without_spreading_or_control() -> None:
    p = _params(0.0)
    grid = TimeGrid(5.0, 100)
    state = integrate_forward(p, ControlSignal.constant(grid, 0.0), grid)
    assert state.terminal_ignorants == 1.0 - p.s0


def test_ignorants_never_increase_under_admissible_control() -> None:
    p = _params(1.2)
    grid = TimeGrid(5.0, 500)
    u = ControlSignal(grid, 0.06 * np.abs(np.sin(grid.times)))
    state = integrate_forward(p, u, grid)
    assert np.all(np.diff(state.i) <= 0)
