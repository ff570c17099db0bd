from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from campaignopt.baselines import evaluate_strategy, no_control, static_control
from campaignopt.config import SWEEP_PARAMETERS, ScenarioConfig
from campaignopt.control import ControlBudget, ControlSignal
from campaignopt.errors import SolverError
from campaignopt.integrator import TimeGrid, integrate_forward
from campaignopt.model import ConstantRate, EpidemicParams
from campaignopt.sweep import SweepConfig, solve_optimal

logger = logging.getLogger(__name__)

STUDY_CATALOG = Path(__file__).with_name("studies.yaml")

ProgressCallback = Callable[[int, int], None]


@dataclass(frozen=True)
class Scenario:
    params: EpidemicParams
    budget: ControlBudget
    sweep: SweepConfig

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> Scenario:
        return cls(params=cfg.to_params(), budget=cfg.to_budget(), sweep=cfg.to_sweep_config())

    def grid(self) -> TimeGrid:
        return TimeGrid(self.params.T, self.sweep.n_steps)


def derive_scenario(base: Scenario, parameter: str, value: float) -> Scenario:
    p, budget = base.params, base.budget
    if parameter == "budget":
        budget = replace(budget, B=value)
    elif parameter == "beta":
        if not isinstance(p.profile, ConstantRate):
            raise ValueError("beta sweep needs a constant spreading rate profile")
        p = replace(p, profile=ConstantRate(value))
    elif parameter == "gamma":
        p = replace(p, gamma=value)
    elif parameter == "horizon":
        # B stays fixed while T moves.
        p = replace(p, T=value)
    elif parameter == "s0":
        p = replace(p, s0=value)
    elif parameter == "u_max":
        budget = replace(budget, u_max=value)
    elif parameter == "alpha":
        p = replace(p, alpha=value)
    else:
        raise ValueError(f"parameter must be one of {','.join(SWEEP_PARAMETERS)} (got {parameter!r})")
    budget.check_horizon(p.T)
    return Scenario(params=p, budget=budget, sweep=base.sweep)


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple[float, ...]
    base: Scenario

    def __post_init__(self) -> None:
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"parameter must be one of {','.join(SWEEP_PARAMETERS)} (got {self.parameter!r})")
        if not self.values:
            raise ValueError("sweep values must be non-empty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        for value in self.values:
            try:
                derive_scenario(self.base, self.parameter, value)
            except ValueError as exc:
                raise ValueError(f"{self.parameter}={value}: {exc}") from None

    def scenarios(self) -> list[Scenario]:
        return [derive_scenario(self.base, self.parameter, v) for v in self.values]


@dataclass(frozen=True)
class SweepRow:
    param_value: float
    J_optimal: float
    J_static: float
    J_nocontrol: float
    spend_optimal: float
    bisect_iters: int
    error: str | None = None

    def __post_init__(self) -> None:
        for name in ("J_optimal", "J_static", "J_nocontrol"):
            value = getattr(self, name)
            if not math.isnan(value) and not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1] (got {value})")

    @property
    def ok(self) -> bool:
        return self.error is None


def _failed_row(value: float, message: str) -> SweepRow:
    nan = float("nan")
    return SweepRow(value, nan, nan, nan, nan, 0, error=message)


def _sweep_row(spec: SweepSpec, value: float) -> SweepRow:
    try:
        scenario = derive_scenario(spec.base, spec.parameter, value)
        grid = scenario.grid()
        result = solve_optimal(scenario.params, scenario.budget, scenario.sweep)
        j_static, _ = evaluate_strategy(scenario.params, static_control(scenario.budget, scenario.params.T, grid), grid, scenario.budget.cost)
        j_none, _ = evaluate_strategy(scenario.params, no_control(grid), grid, scenario.budget.cost)
    except (SolverError, ValueError) as exc:
        logger.warning("%s=%g failed: %s", spec.parameter, value, exc)
        return _failed_row(value, str(exc))
    return SweepRow(
        param_value=value,
        J_optimal=result.J,
        J_static=j_static,
        J_nocontrol=j_none,
        spend_optimal=result.spend,
        bisect_iters=result.diagnostics.bisection_iterations,
    )


def run_parameter_sweep(spec: SweepSpec, workers: int = 1, progress: ProgressCallback | None = None) -> list[SweepRow]:
    if workers < 1:
        raise ValueError("workers must be >= 1")
    total = len(spec.values)
    if workers == 1:
        rows: list[SweepRow] = []
        for value in spec.values:
            rows.append(_sweep_row(spec, value))
            if progress is not None:
                progress(len(rows), total)
        return rows

    pending: list[SweepRow | None] = [None] * total
    done = 0
    # Row solves are CPU-bound Python loops.
    with ProcessPoolExecutor(max_workers=workers) as executor:
        future_map = {executor.submit(_sweep_row, spec, value): idx for idx, value in enumerate(spec.values)}
        for future in as_completed(future_map):
            pending[future_map[future]] = future.result()
            done += 1
            if progress is not None:
                progress(done, total)
    return [row for row in pending if row is not None]


@dataclass(frozen=True, eq=False)
class ShapeStudy:
    control: ControlSignal
    spend_curve: np.ndarray
    static_spend_curve: np.ndarray
    J_optimal: float
    J_static: float
    J_nocontrol: float

    @property
    def t(self) -> np.ndarray:
        return self.control.grid.times

    @property
    def J_triple(self) -> tuple[float, float, float]:
        return self.J_optimal, self.J_static, self.J_nocontrol

    def mean_control(self, start: float, stop: float) -> float:
        mask = (self.t >= start) & (self.t <= stop)
        return float(np.mean(self.control.values[mask]))


def run_shape_study(p: EpidemicParams, budget: ControlBudget, cfg: SweepConfig | None = None) -> ShapeStudy:
    cfg = cfg or SweepConfig()
    grid = TimeGrid(p.T, cfg.n_steps)
    result = solve_optimal(p, budget, cfg)
    static_state = integrate_forward(p, static_control(budget, p.T, grid), grid, budget.cost)
    j_none, _ = evaluate_strategy(p, no_control(grid), grid, budget.cost)
    return ShapeStudy(
        control=result.control,
        spend_curve=result.state.b.copy(),
        static_spend_curve=static_state.b.copy(),
        J_optimal=result.J,
        J_static=static_state.terminal_ignorants,
        J_nocontrol=j_none,
    )


def load_study_catalog(path: str | Path | None = None) -> dict[str, Any]:
    source = Path(path) if path is not None else STUDY_CATALOG
    data = yaml.safe_load(source.read_text(encoding="utf-8"))
    if not isinstance(data, dict) or not isinstance(data.get("parameter_studies"), dict):
        raise ValueError(f"{source}: expected a mapping with parameter_studies")
    data.setdefault("shape_studies", {})
    return data


def _study_values(name: str, entry: dict[str, Any]) -> tuple[float, ...]:
    if "values" in entry:
        return tuple(float(v) for v in entry["values"])
    if "linspace" in entry:
        start, stop, num = entry["linspace"]
        return tuple(float(v) for v in np.linspace(float(start), float(stop), int(num)))
    raise ValueError(f"study {name!r} needs values or linspace")


def _based_on(cfg: ScenarioConfig, overrides: dict[str, Any] | None) -> ScenarioConfig:
    merged = asdict(cfg)
    merged.update(overrides or {})
    # A fixed B in the study replaces any fractional budget of the caller.
    if "B" in (overrides or {}):
        merged["budget_fraction"] = None
    return ScenarioConfig(**merged)


def catalog_sweep_spec(name: str, cfg: ScenarioConfig | None = None, catalog: dict[str, Any] | None = None) -> SweepSpec:
    catalog = catalog or load_study_catalog()
    studies = catalog["parameter_studies"]
    if name not in studies:
        raise ValueError(f"unknown parameter study {name!r} (known: {','.join(sorted(studies))})")
    entry = studies[name]
    base_cfg = _based_on(cfg or ScenarioConfig(), entry.get("base"))
    return SweepSpec(parameter=entry["parameter"], values=_study_values(name, entry), base=Scenario.from_config(base_cfg))


def catalog_shape_scenarios(cfg: ScenarioConfig | None = None, catalog: dict[str, Any] | None = None) -> dict[str, Scenario]:
    catalog = catalog or load_study_catalog()
    base = cfg or ScenarioConfig()
    return {name: Scenario.from_config(_based_on(base, entry.get("base"))) for name, entry in catalog["shape_studies"].items()}
