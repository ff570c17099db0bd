from __future__ import annotations

from campaignopt.control import ControlBudget, ControlSignal, CostFunction
from campaignopt.integrator import TimeGrid, integrate_forward
from campaignopt.model import EpidemicParams


def static_level(budget: ControlBudget, T: float) -> float:
    level = float(budget.cost.inverse(budget.B / T))
    if level > budget.u_max * (1 + 1e-12):
        raise ValueError(f"static control infeasible: level {level:.6g} exceeds u_max={budget.u_max}")
    return min(level, budget.u_max)


def static_control(budget: ControlBudget, T: float, grid: TimeGrid) -> ControlSignal:
    return ControlSignal.constant(grid, static_level(budget, T))


def no_control(grid: TimeGrid) -> ControlSignal:
    return ControlSignal.constant(grid, 0.0)


def evaluate_strategy(p: EpidemicParams, u: ControlSignal, grid: TimeGrid, cost: CostFunction | None = None) -> tuple[float, float]:
    state = integrate_forward(p, u, grid, cost)
    return state.terminal_ignorants, float(state.b[-1])
