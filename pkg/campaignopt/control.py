from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Protocol

import numpy as np

from campaignopt.errors import DegenerateMultiplierError

if TYPE_CHECKING:
    from campaignopt.integrator import TimeGrid

EPS_LAMBDA = 1e-12


def _scalar_or_array(value, like):
    if np.ndim(like) == 0:
        return float(value)
    return value


class CostFunction(Protocol):
    def evaluate(self, u): ...

    def derivative_inverse(self, y): ...

    def inverse(self, v): ...


@dataclass(frozen=True)
class QuadraticCost:
    def evaluate(self, u):
        return u * u

    def derivative_inverse(self, y):
        return y / 2.0

    def inverse(self, v):
        if np.any(np.asarray(v) < 0):
            raise ValueError(f"cost inverse is undefined for negative spend rate (got {v})")
        if np.ndim(v) == 0:
            return math.sqrt(v)
        return np.sqrt(v)


@dataclass(frozen=True)
class PowerCost:
    exponent: float

    def __post_init__(self) -> None:
        if not self.exponent > 1:
            raise ValueError(f"cost_exponent must be > 1 (got {self.exponent})")

    def evaluate(self, u):
        return np.asarray(u, dtype=float) ** self.exponent if np.ndim(u) else float(u) ** self.exponent

    def derivative_inverse(self, y):
        # Odd extension below zero keeps negative arguments negative, so the box projection clamps them to 0.
        yy = np.asarray(y, dtype=float)
        value = np.sign(yy) * (np.abs(yy) / self.exponent) ** (1.0 / (self.exponent - 1.0))
        return _scalar_or_array(value, y)

    def inverse(self, v):
        if np.any(np.asarray(v) < 0):
            raise ValueError(f"cost inverse is undefined for negative spend rate (got {v})")
        value = np.asarray(v, dtype=float) ** (1.0 / self.exponent)
        return _scalar_or_array(value, v)


def quadratic_cost() -> QuadraticCost:
    return QuadraticCost()


@dataclass(frozen=True)
class ControlBudget:
    cost: CostFunction
    u_max: float
    B: float

    def __post_init__(self) -> None:
        if not self.u_max > 0:
            raise ValueError(f"u_max must be > 0 (got {self.u_max})")
        if not self.B >= 0:
            raise ValueError(f"B must be >= 0 (got {self.B})")

    def max_spend(self, T: float) -> float:
        return float(self.cost.evaluate(self.u_max)) * T

    def check_horizon(self, T: float) -> None:
        limit = self.max_spend(T)
        if self.B > limit * (1 + 1e-12):
            raise ValueError(f"B must be <= c(u_max)*T = {limit:.6g} (got {self.B})")


@dataclass(frozen=True, eq=False)
class ControlSignal:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_steps + 1,):
            raise ValueError(f"control needs {self.grid.n_steps + 1} samples (got shape {values.shape})")
        if not np.all(np.isfinite(values)):
            raise ValueError("control samples must be finite")
        if np.any(values < 0):
            raise ValueError(f"control samples must be >= 0 (min {values.min()})")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: TimeGrid, level: float) -> ControlSignal:
        return cls(grid, np.full(grid.n_steps + 1, float(level)))

    def check_admissible(self, u_max: float) -> None:
        peak = float(self.values.max())
        if peak > u_max * (1 + 1e-12):
            raise ValueError(f"control exceeds u_max={u_max} (peak {peak})")


def pointwise_optimal_control(i, s, lam_i, lam_s, lam_b: float, alpha: float, budget: ControlBudget, eps: float = EPS_LAMBDA):
    if not lam_b > eps:
        raise DegenerateMultiplierError(f"degenerate budget multiplier: lambda_b={lam_b} <= {eps}")
    numerator = lam_i * i - lam_s * i - lam_s * alpha * (1.0 - i - s)
    u = np.clip(budget.cost.derivative_inverse(numerator / lam_b), 0.0, budget.u_max)
    return _scalar_or_array(u, numerator)


def budget_spent(u: ControlSignal, cost: CostFunction) -> float:
    rate = np.asarray(cost.evaluate(u.values), dtype=float)
    return float(u.grid.h * (rate.sum() - 0.5 * (rate[0] + rate[-1])))
