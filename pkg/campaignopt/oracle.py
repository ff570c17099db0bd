from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass

import numpy as np

from campaignopt.control import ControlBudget, ControlSignal
from campaignopt.errors import IntegrationError
from campaignopt.integrator import CLAMP_BAND, DEFAULT_N_STEPS, TimeGrid, rk4_step
from campaignopt.model import EpidemicParams

MAX_SEGMENTS = 6
MAX_LEVELS = 16
BUDGET_MATCH_TOL = 1e-8


@dataclass(frozen=True)
class PiecewiseControl:
    T: float
    levels: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.levels:
            raise ValueError("piecewise control needs at least one segment")
        if min(self.levels) < 0:
            raise ValueError(f"segment levels must be >= 0 (got {self.levels})")

    @property
    def n_segments(self) -> int:
        return len(self.levels)

    @property
    def segment_length(self) -> float:
        return self.T / self.n_segments

    def spend(self, budget: ControlBudget) -> float:
        return float(np.sum(budget.cost.evaluate(np.asarray(self.levels))) * self.segment_length)

    def sample(self, grid: TimeGrid) -> ControlSignal:
        index = np.minimum((grid.times / self.segment_length).astype(int), self.n_segments - 1)
        return ControlSignal(grid, np.asarray(self.levels)[index])


@dataclass(frozen=True)
class OracleResult:
    J: float
    control: PiecewiseControl
    n_candidates: int
    n_feasible: int


def _terminal_ignorants_batch(p: EpidemicParams, levels: np.ndarray, n_steps: int) -> np.ndarray:
    """Integrate every row of `levels` (one piecewise-constant control per row) and return i(T) per row."""
    grid = TimeGrid(p.T, n_steps)
    h = grid.h
    n_segments = levels.shape[1]
    segment_length = p.T / n_segments
    beta_nodes = np.asarray(p.beta(grid.times), dtype=float)
    beta_mid = np.asarray(p.beta(grid.midpoints), dtype=float)
    midpoints = grid.midpoints
    i = np.full(levels.shape[0], 1.0 - p.s0)
    s = np.full(levels.shape[0], p.s0)
    for k in range(n_steps):
        # Each step takes the level of the segment holding its midpoint.
        j = min(int(midpoints[k] / segment_length), n_segments - 1)
        u = levels[:, j]
        i, s = rk4_step(i, s, h, beta_nodes[k], beta_mid[k], beta_nodes[k + 1], u, u, u, p.gamma, p.alpha)
        if np.any(i < -CLAMP_BAND) or np.any(i > 1 + CLAMP_BAND) or np.any(s < -CLAMP_BAND) or np.any(s > 1 + CLAMP_BAND):
            raise IntegrationError(f"state left [0, 1] at step {k + 1}; step size too coarse")
        i = np.clip(i, 0.0, 1.0)
        s = np.clip(s, 0.0, 1.0)
        s = np.where(i + s > 1.0, 1.0 - i, s)
    return i


def _check_alignment(n_steps: int, n_segments: int) -> None:
    # Segment boundaries must fall on grid nodes; each step takes one level.
    if n_steps % n_segments:
        raise ValueError(f"n_steps must be a multiple of n_segments (got {n_steps} steps, {n_segments} segments)")


def evaluate_piecewise(p: EpidemicParams, control: PiecewiseControl, n_steps: int = DEFAULT_N_STEPS) -> float:
    if abs(control.T - p.T) > 1e-12 * p.T:
        raise ValueError(f"piecewise control horizon {control.T} does not match T={p.T}")
    _check_alignment(n_steps, control.n_segments)
    return float(_terminal_ignorants_batch(p, np.asarray([control.levels]), n_steps)[0])


def enumerate_candidates(budget: ControlBudget, T: float, n_segments: int, n_levels: int) -> tuple[np.ndarray, int]:
    """Budget-exhausting level vectors in lexicographic order, plus the raw combination count."""
    levels_grid = np.linspace(0.0, budget.u_max, n_levels)
    free = n_segments - 1
    if free == 0:
        combos = np.zeros((1, 0), dtype=int)
    else:
        combos = np.array(list(itertools.product(range(n_levels), repeat=free)), dtype=int)
    prefix = levels_grid[combos]
    segment_length = T / n_segments
    spent = np.sum(np.asarray(budget.cost.evaluate(prefix), dtype=float).reshape(prefix.shape), axis=1) * segment_length
    cap = float(budget.cost.evaluate(budget.u_max))
    residual_rate = (budget.B - spent) / segment_length
    slack = 1e-12 * cap
    feasible = (residual_rate >= -slack) & (residual_rate <= cap + slack)
    last = np.asarray(budget.cost.inverse(np.clip(residual_rate[feasible], 0.0, cap)), dtype=float)
    candidates = np.column_stack([prefix[feasible], np.minimum(last, budget.u_max)])
    return candidates, len(combos)


def oracle_search(
    p: EpidemicParams,
    budget: ControlBudget,
    n_segments: int,
    n_levels: int,
    *,
    n_steps: int = DEFAULT_N_STEPS,
    workers: int = 1,
) -> OracleResult:
    if not 1 <= n_segments <= MAX_SEGMENTS:
        raise ValueError(f"n_segments must be in [1, {MAX_SEGMENTS}] (got {n_segments})")
    if not 2 <= n_levels <= MAX_LEVELS:
        raise ValueError(f"n_levels must be in [2, {MAX_LEVELS}] (got {n_levels})")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    _check_alignment(n_steps, n_segments)
    budget.check_horizon(p.T)

    candidates, n_combos = enumerate_candidates(budget, p.T, n_segments, n_levels)
    if len(candidates) == 0:
        raise ValueError(f"no budget-exhausting candidate on a {n_levels}-level grid with {n_segments} segments")

    chunks = np.array_split(candidates, min(workers, len(candidates)))
    results: list[np.ndarray | None] = [None] * len(chunks)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        future_map = {executor.submit(_terminal_ignorants_batch, p, chunk, n_steps): idx for idx, chunk in enumerate(chunks)}
        for future in as_completed(future_map):
            results[future_map[future]] = future.result()
    j_values = np.concatenate(results)

    # argmin keeps the first minimum, i.e. the lexicographically smallest level vector.
    best = int(np.argmin(j_values))
    return OracleResult(
        J=float(j_values[best]),
        control=PiecewiseControl(p.T, tuple(float(v) for v in candidates[best])),
        n_candidates=n_combos,
        n_feasible=len(candidates),
    )


def project_to_piecewise(u: ControlSignal, budget: ControlBudget, n_segments: int) -> PiecewiseControl:
    grid = u.grid
    T = grid.T
    cumulative = np.concatenate(([0.0], np.cumsum(0.5 * grid.h * (u.values[:-1] + u.values[1:]))))
    bounds = np.linspace(0.0, T, n_segments + 1)
    integrals = np.diff(np.interp(bounds, grid.times, cumulative))
    averages = np.clip(integrals / (T / n_segments), 0.0, budget.u_max)

    if not np.any(averages > 0):
        level = float(budget.cost.inverse(budget.B / T))
        return PiecewiseControl(T, tuple([min(level, budget.u_max)] * n_segments))

    def _spend(scale: float) -> float:
        scaled = np.minimum(scale * averages, budget.u_max)
        return float(np.sum(budget.cost.evaluate(scaled)) * T / n_segments)

    low, high = 0.0, budget.u_max / float(averages[averages > 0].min())
    if _spend(high) < budget.B - BUDGET_MATCH_TOL:
        raise ValueError("cannot renormalise projected control to the budget: too many empty segments")
    for _ in range(200):
        mid = 0.5 * (low + high)
        if _spend(mid) < budget.B:
            low = mid
        else:
            high = mid
    scaled = np.minimum(high * averages, budget.u_max)
    return PiecewiseControl(T, tuple(float(v) for v in scaled))
