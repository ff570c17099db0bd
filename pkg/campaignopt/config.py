from __future__ import annotations

import re
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

from campaignopt.control import ControlBudget, CostFunction, PowerCost, quadratic_cost
from campaignopt.integrator import TimeGrid
from campaignopt.model import ConstantRate, EpidemicParams, LogisticDecreasing, LogisticIncreasing, SpreadingProfile
from campaignopt.sweep import SweepConfig

PROFILE_CHOICES = ("constant", "logistic_increasing", "logistic_decreasing")
SWEEP_PARAMETERS = ("budget", "beta", "gamma", "horizon", "s0", "u_max", "alpha")
DEFAULT_BUDGET_FRACTION = 0.125
_INLINE_COMMENT = re.compile(r"\s+#.*$")


@dataclass(frozen=True)
class ScenarioConfig:
    profile: str = "constant"
    beta: float = 0.8
    beta_m: float = 0.01
    beta_M: float = 2.0
    a1: float = 2.0
    c1: float = 3.0
    a2: float = 2.0
    c2: float = 2.0
    gamma: float = 0.1
    alpha: float = 0.5
    s0: float = 0.01
    T: float = 5.0
    u_max: float = 0.06
    B: float | None = None
    budget_fraction: float | None = None
    cost_exponent: float = 2.0
    lambda_low: float = 0.0
    lambda_high: float = 100.0
    B_th: float = 1e-4
    lambda_th: float = 1e-4
    n_sweep: int = 50
    theta: float = 1.0
    n_steps: int = 1000
    sweep_param: str | None = None
    sweep_values: tuple[float, ...] = ()
    n_segments: int = 5
    n_levels: int = 12
    control_file: str | None = None
    workers: int = 1
    out: str | None = None

    def __post_init__(self) -> None:
        if self.profile not in PROFILE_CHOICES:
            raise ValueError(f"profile must be one of {','.join(PROFILE_CHOICES)} (got {self.profile!r})")
        _require(self.beta >= 0, "beta", ">= 0", self.beta)
        _require(self.gamma >= 0, "gamma", ">= 0", self.gamma)
        _require(self.alpha >= 0, "alpha", ">= 0", self.alpha)
        _require(0 < self.s0 < 1, "s0", "in (0, 1)", self.s0)
        _require(self.T > 0, "T", "> 0", self.T)
        _require(self.u_max > 0, "u_max", "> 0", self.u_max)
        _require(self.cost_exponent > 1, "cost_exponent", "> 1", self.cost_exponent)
        if self.B is not None and self.budget_fraction is not None:
            raise ValueError("give either B or budget_fraction, not both")
        if self.B is not None:
            _require(0 <= self.B <= self.max_spend * (1 + 1e-12), "B", f"in [0, c(u_max)*T = {self.max_spend:.6g}]", self.B)
        if self.budget_fraction is not None:
            _require(0 <= self.budget_fraction <= 1, "budget_fraction", "in [0, 1]", self.budget_fraction)
        _require(0 <= self.lambda_low < self.lambda_high, "lambda_low", "in [0, lambda_high)", self.lambda_low)
        _require(self.B_th > 0, "B_th", "> 0", self.B_th)
        _require(self.lambda_th > 0, "lambda_th", "> 0", self.lambda_th)
        _require(self.n_sweep >= 1, "n_sweep", ">= 1", self.n_sweep)
        _require(0 < self.theta <= 1, "theta", "in (0, 1]", self.theta)
        _require(self.n_steps >= 1, "n_steps", ">= 1", self.n_steps)
        _require(self.n_segments >= 1, "n_segments", ">= 1", self.n_segments)
        _require(self.n_levels >= 2, "n_levels", ">= 2", self.n_levels)
        _require(self.workers >= 1, "workers", ">= 1", self.workers)
        if self.sweep_param is not None and self.sweep_param not in SWEEP_PARAMETERS:
            raise ValueError(f"sweep_param must be one of {','.join(SWEEP_PARAMETERS)} (got {self.sweep_param!r})")
        if any(b <= a for a, b in zip(self.sweep_values, self.sweep_values[1:])):
            raise ValueError("sweep_values must be strictly increasing")
        # Profile parameters are validated by the profile constructors.
        self.profile_object()

    @property
    def cost(self) -> CostFunction:
        if self.cost_exponent == 2.0:
            return quadratic_cost()
        return PowerCost(self.cost_exponent)

    @property
    def max_spend(self) -> float:
        return float(self.cost.evaluate(self.u_max)) * self.T

    @property
    def budget(self) -> float:
        if self.B is not None:
            return self.B
        fraction = DEFAULT_BUDGET_FRACTION if self.budget_fraction is None else self.budget_fraction
        return fraction * self.max_spend

    def profile_object(self) -> SpreadingProfile:
        if self.profile == "logistic_increasing":
            return LogisticIncreasing(self.beta_m, self.beta_M, self.a1, self.c1)
        if self.profile == "logistic_decreasing":
            return LogisticDecreasing(self.beta_m, self.beta_M, self.a2, self.c2)
        return ConstantRate(self.beta)

    def to_params(self) -> EpidemicParams:
        return EpidemicParams(profile=self.profile_object(), gamma=self.gamma, alpha=self.alpha, s0=self.s0, T=self.T)

    def to_budget(self) -> ControlBudget:
        return ControlBudget(cost=self.cost, u_max=self.u_max, B=self.budget)

    def to_sweep_config(self) -> SweepConfig:
        return SweepConfig(
            lambda_low=self.lambda_low,
            lambda_high=self.lambda_high,
            budget_tol=self.B_th,
            lambda_tol=self.lambda_th,
            n_sweep=self.n_sweep,
            relaxation=self.theta,
            n_steps=self.n_steps,
        )

    def grid(self) -> TimeGrid:
        return TimeGrid(self.T, self.n_steps)


def _require(ok: bool, key: str, bound: str, value: Any) -> None:
    if not ok:
        raise ValueError(f"{key} must be {bound} (got {value})")


_FIELD_KINDS: dict[str, str] = {f.name: str(f.type) for f in fields(ScenarioConfig)}


def _coerce(key: str, raw: str) -> Any:
    kind = _FIELD_KINDS[key]
    try:
        if kind.startswith("tuple"):
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
    except ValueError:
        raise ValueError(f"{key}: cannot parse {raw!r} as {kind.split(' ')[0]}") from None
    return raw


def _iter_pairs(text: str, source: str = "config"):
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value' (got {raw_line!r})")
        key, value = line.split("=", 1)
        key = key.strip()
        value = _INLINE_COMMENT.sub("", value).strip().strip("\"").strip("'")
        if not key:
            raise ValueError(f"{source}:{lineno}: missing key")
        yield lineno, key, value


def _collect(text: str, source: str) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for lineno, key, raw in _iter_pairs(text, source):
        if key not in _FIELD_KINDS:
            raise ValueError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def parse_config(text: str, source: str = "config") -> ScenarioConfig:
    return ScenarioConfig(**_collect(text, source))


def load_config(path: str | None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    return parse_config(Path(path).read_text(encoding="utf-8"), source=path)


def apply_overrides(cfg: ScenarioConfig, overrides: list[str] | None) -> ScenarioConfig:
    if not overrides:
        return cfg
    merged = asdict(cfg)
    merged.update(_collect("\n".join(overrides), "--set"))
    return ScenarioConfig(**merged)


def _format_value(value: Any) -> str:
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: ScenarioConfig) -> str:
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None or value == ():
            continue
        lines.append(f"{f.name} = {_format_value(value)}")
    return "\n".join(lines) + "\n"
