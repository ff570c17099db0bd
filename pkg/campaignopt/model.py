from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

STATE_TOLERANCE = 1e-9


def _as_output(value: np.ndarray, t: float | np.ndarray) -> float | np.ndarray:
    if np.ndim(t) == 0:
        return float(value)
    return value


@dataclass(frozen=True)
class ConstantRate:
    beta: float

    def __post_init__(self) -> None:
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0 (got {self.beta})")

    def rate(self, t: float | np.ndarray) -> float | np.ndarray:
        return _as_output(np.full(np.shape(t), float(self.beta)), t)


@dataclass(frozen=True)
class LogisticIncreasing:
    """beta_m + (beta_M - beta_m) / (1 + exp(-a1 (t - c1))); rises from the floor to the ceiling."""

    beta_m: float
    beta_M: float
    a1: float
    c1: float

    def __post_init__(self) -> None:
        _check_logistic(self.beta_m, self.beta_M, self.a1, "a1")

    def rate(self, t: float | np.ndarray) -> float | np.ndarray:
        tt = np.asarray(t, dtype=float)
        value = self.beta_m + (self.beta_M - self.beta_m) / (1.0 + np.exp(-self.a1 * (tt - self.c1)))
        return _as_output(value, t)


@dataclass(frozen=True)
class LogisticDecreasing:
    """(beta_M - beta_m) * (1 - 1 / (1 + exp(-a2 (t - c2)))); decays towards zero (no floor)."""

    beta_m: float
    beta_M: float
    a2: float
    c2: float

    def __post_init__(self) -> None:
        _check_logistic(self.beta_m, self.beta_M, self.a2, "a2")

    def rate(self, t: float | np.ndarray) -> float | np.ndarray:
        tt = np.asarray(t, dtype=float)
        value = (self.beta_M - self.beta_m) * (1.0 - 1.0 / (1.0 + np.exp(-self.a2 * (tt - self.c2))))
        return _as_output(value, t)


SpreadingProfile = Union[ConstantRate, LogisticIncreasing, LogisticDecreasing]


def _check_logistic(beta_m: float, beta_M: float, steepness: float, steepness_key: str) -> None:
    if not beta_m >= 0:
        raise ValueError(f"beta_m must be >= 0 (got {beta_m})")
    if not beta_M > beta_m:
        raise ValueError(f"beta_M must be > beta_m (got beta_M={beta_M}, beta_m={beta_m})")
    if not steepness > 0:
        raise ValueError(f"{steepness_key} must be > 0 (got {steepness})")


@dataclass(frozen=True)
class EpidemicParams:
    profile: SpreadingProfile
    gamma: float
    alpha: float
    s0: float
    T: float

    def __post_init__(self) -> None:
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0 (got {self.gamma})")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0 (got {self.alpha})")
        if not 0 < self.s0 < 1:
            raise ValueError(f"s0 must satisfy 0 < s0 < 1 (got {self.s0})")
        if not self.T > 0:
            raise ValueError(f"T must be > 0 (got {self.T})")

    def beta(self, t: float | np.ndarray) -> float | np.ndarray:
        return self.profile.rate(t)


@dataclass(frozen=True)
class State:
    i: float
    s: float

    def __post_init__(self) -> None:
        if self.i < 0 or self.s < 0:
            raise ValueError(f"state fractions must be >= 0 (got i={self.i}, s={self.s})")
        if self.i + self.s > 1 + STATE_TOLERANCE:
            raise ValueError(f"i + s must be <= 1 (got {self.i + self.s})")

    @property
    def r(self) -> float:
        return 1.0 - self.i - self.s


def eval_spreading_rate(profile: SpreadingProfile, t: float | np.ndarray) -> float | np.ndarray:
    return profile.rate(t)


def state_derivatives(i, s, beta, u, gamma: float, alpha: float):
    # Plain arithmetic so floats and numpy arrays go through the same code path.
    contact = i * s
    di = -beta * contact - u * i
    ds = (beta + gamma) * contact - gamma * s + u * i + alpha * u * (1.0 - i - s)
    return di, ds


def controlled_rhs(x: State, t: float, u: float, p: EpidemicParams) -> tuple[float, float]:
    if u < 0:
        raise ValueError(f"control level must be >= 0 (got {u})")
    return state_derivatives(x.i, x.s, p.beta(t), u, p.gamma, p.alpha)


def uncontrolled_rhs(x: State, t: float, p: EpidemicParams) -> tuple[float, float]:
    return controlled_rhs(x, t, 0.0, p)


def uncontrolled_rhs_full(i: float, s: float, r: float, t: float, p: EpidemicParams) -> tuple[float, float, float]:
    beta = p.beta(t)
    di = -beta * i * s
    dr = p.gamma * s * (s + r)
    ds = beta * i * s - dr
    return di, ds, dr
