from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from campaignopt.control import EPS_LAMBDA, ControlBudget, ControlSignal, pointwise_optimal_control
from campaignopt.errors import BisectionError, DegenerateMultiplierError
from campaignopt.integrator import DEFAULT_N_STEPS, TimeGrid, Trajectory, integrate_adjoint_backward, integrate_forward
from campaignopt.model import EpidemicParams

logger = logging.getLogger(__name__)

CONVERGENCE_FRACTION = 1e-3


@dataclass(frozen=True)
class SweepConfig:
    lambda_low: float = 0.0
    lambda_high: float = 100.0
    budget_tol: float = 1e-4
    lambda_tol: float = 1e-4
    n_sweep: int = 50
    relaxation: float = 0.5
    n_steps: int = DEFAULT_N_STEPS
    max_bisections: int = 200

    def __post_init__(self) -> None:
        if not 0 <= self.lambda_low < self.lambda_high:
            raise ValueError(f"need 0 <= lambda_low < lambda_high (got {self.lambda_low}, {self.lambda_high})")
        if not self.budget_tol > 0:
            raise ValueError(f"B_th must be > 0 (got {self.budget_tol})")
        if not self.lambda_tol > 0:
            raise ValueError(f"lambda_th must be > 0 (got {self.lambda_tol})")
        if self.n_sweep < 1:
            raise ValueError(f"n_sweep must be >= 1 (got {self.n_sweep})")
        if not 0 < self.relaxation <= 1:
            raise ValueError(f"theta must be in (0, 1] (got {self.relaxation})")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1 (got {self.n_steps})")
        if self.max_bisections < 1:
            raise ValueError(f"max_bisections must be >= 1 (got {self.max_bisections})")


@dataclass(frozen=True, eq=False)
class InnerSweepResult:
    control: ControlSignal
    state: Trajectory
    spend: float
    lambda_b: float
    change_norms: tuple[float, ...]
    converged: bool


@dataclass(frozen=True)
class SweepDiagnostics:
    bisection_iterations: int
    change_norms: tuple[float, ...]
    bracket_history: tuple[tuple[float, float], ...]
    inner_converged: bool
    shortcut: str | None = None


@dataclass(frozen=True, eq=False)
class SolveResult:
    control: ControlSignal
    state: Trajectory
    J: float
    lambda_b: float
    spend: float
    diagnostics: SweepDiagnostics


def _evaluate(p: EpidemicParams, budget: ControlBudget, control: ControlSignal) -> Trajectory:
    state = integrate_forward(p, control, control.grid, budget.cost)
    return integrate_adjoint_backward(p, control, state, control.grid)


def inner_sweep(p: EpidemicParams, budget: ControlBudget, lambda_b: float, cfg: SweepConfig) -> InnerSweepResult:
    if not lambda_b > EPS_LAMBDA:
        raise DegenerateMultiplierError(f"degenerate budget multiplier: lambda_b={lambda_b} <= {EPS_LAMBDA}")
    grid = TimeGrid(p.T, cfg.n_steps)
    theta = cfg.relaxation
    u = np.zeros(grid.n_steps + 1)
    norms: list[float] = []
    for _ in range(cfg.n_sweep):
        state = _evaluate(p, budget, ControlSignal(grid, u))
        u_new = pointwise_optimal_control(state.i, state.s, state.lam_i, state.lam_s, lambda_b, p.alpha, budget)
        u_next = theta * u_new + (1.0 - theta) * u
        norms.append(float(np.max(np.abs(u_next - u))))
        u = u_next

    control = ControlSignal(grid, u)
    state = _evaluate(p, budget, control)
    converged = norms[-1] <= CONVERGENCE_FRACTION * budget.u_max
    if not converged:
        logger.warning(
            "inner sweep not converged at lambda_b=%.6g: last control change %.3g > %.3g",
            lambda_b,
            norms[-1],
            CONVERGENCE_FRACTION * budget.u_max,
        )
    return InnerSweepResult(
        control=control,
        state=state,
        spend=float(state.b[-1]),
        lambda_b=lambda_b,
        change_norms=tuple(norms),
        converged=converged,
    )


def _shortcut_result(p: EpidemicParams, budget: ControlBudget, cfg: SweepConfig, level: float, shortcut: str) -> SolveResult:
    grid = TimeGrid(p.T, cfg.n_steps)
    control = ControlSignal.constant(grid, level)
    state = _evaluate(p, budget, control)
    return SolveResult(
        control=control,
        state=state,
        J=state.terminal_ignorants,
        lambda_b=0.0,
        spend=float(state.b[-1]),
        diagnostics=SweepDiagnostics(
            bisection_iterations=0,
            change_norms=(),
            bracket_history=(),
            inner_converged=True,
            shortcut=shortcut,
        ),
    )


def _check_bracket(p: EpidemicParams, budget: ControlBudget, cfg: SweepConfig) -> None:
    target = budget.B
    high = inner_sweep(p, budget, cfg.lambda_high, cfg)
    if high.spend > target + cfg.budget_tol:
        raise BisectionError(
            f"bisection bracket invalid: spend {high.spend:.6g} at lambda_high={cfg.lambda_high} is still above B={target:.6g}"
        )
    # A lambda_low at or below EPS_LAMBDA is the saturated limit; a shortfall there shows up when the bracket collapses.
    if cfg.lambda_low > EPS_LAMBDA:
        low = inner_sweep(p, budget, cfg.lambda_low, cfg)
        if low.spend < target - cfg.budget_tol:
            raise BisectionError(
                f"bisection bracket invalid: spend {low.spend:.6g} at lambda_low={cfg.lambda_low} is already below B={target:.6g}"
            )


def solve_optimal(p: EpidemicParams, budget: ControlBudget, cfg: SweepConfig | None = None) -> SolveResult:
    cfg = cfg or SweepConfig()
    budget.check_horizon(p.T)
    target = budget.B
    if abs(target - budget.max_spend(p.T)) < cfg.budget_tol:
        return _shortcut_result(p, budget, cfg, budget.u_max, "full_budget")
    if target == 0:
        return _shortcut_result(p, budget, cfg, 0.0, "zero_budget")
    _check_bracket(p, budget, cfg)

    low, high = cfg.lambda_low, cfg.lambda_high
    history: list[tuple[float, float]] = []
    for iteration in range(1, cfg.max_bisections + 1):
        mid = 0.5 * (low + high)
        inner = inner_sweep(p, budget, mid, cfg)
        history.append((mid, inner.spend))
        logger.info("bisection %d: lambda_b=%.6g spend=%.6g target=%.6g", iteration, mid, inner.spend, target)
        if inner.spend > target:
            low = mid
        elif inner.spend < target:
            high = mid
        else:
            low = high = mid
        budget_met = abs(inner.spend - target) < cfg.budget_tol
        collapsed = (high - low) < cfg.lambda_tol
        if budget_met and collapsed:
            return SolveResult(
                control=inner.control,
                state=inner.state,
                J=inner.state.terminal_ignorants,
                lambda_b=mid,
                spend=inner.spend,
                diagnostics=SweepDiagnostics(
                    bisection_iterations=iteration,
                    change_norms=inner.change_norms,
                    bracket_history=tuple(history),
                    inner_converged=inner.converged,
                ),
            )
        if collapsed and (low == cfg.lambda_low or high == cfg.lambda_high):
            raise BisectionError(
                f"bisection bracket invalid: spend {inner.spend:.6g} never crosses B={target:.6g} "
                f"inside [{cfg.lambda_low}, {cfg.lambda_high}]"
            )
    raise BisectionError(f"bisection stalled after {cfg.max_bisections} iterations (last spend {history[-1][1]:.6g}, B={target:.6g})")


def cumulative_spend_curve(result: SolveResult) -> np.ndarray:
    return result.state.b.copy()


def control_gradient(p: EpidemicParams, state: Trajectory) -> np.ndarray:
    """dJ/du(t): the budget-free part of dH/du, evaluated on a trajectory with adjoints."""
    if not state.has_adjoints:
        raise ValueError("control_gradient needs a trajectory with adjoint channels")
    return -state.lam_i * state.i + state.lam_s * state.i + state.lam_s * p.alpha * state.r


def predicted_cost_change(p: EpidemicParams, state: Trajectory, delta: np.ndarray) -> float:
    integrand = control_gradient(p, state) * np.asarray(delta, dtype=float)
    return float(state.grid.h * (integrand.sum() - 0.5 * (integrand[0] + integrand[-1])))
