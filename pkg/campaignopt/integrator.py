from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from campaignopt.control import ControlSignal, CostFunction, quadratic_cost
from campaignopt.errors import IntegrationError
from campaignopt.model import EpidemicParams, state_derivatives, uncontrolled_rhs_full

logger = logging.getLogger(__name__)

DEFAULT_N_STEPS = 1000
CLAMP_BAND = 1e-6


@dataclass(frozen=True)
class TimeGrid:
    T: float
    n_steps: int = DEFAULT_N_STEPS

    def __post_init__(self) -> None:
        if not self.T > 0:
            raise ValueError(f"T must be > 0 (got {self.T})")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer (got {self.n_steps})")

    @property
    def h(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_steps + 1)

    @property
    def midpoints(self) -> np.ndarray:
        nodes = self.times
        return 0.5 * (nodes[:-1] + nodes[1:])


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: TimeGrid
    i: np.ndarray
    s: np.ndarray
    b: np.ndarray
    lam_i: np.ndarray | None = None
    lam_s: np.ndarray | None = None
    clamped: int = 0

    @property
    def t(self) -> np.ndarray:
        return self.grid.times

    @property
    def r(self) -> np.ndarray:
        return 1.0 - self.i - self.s

    @property
    def has_adjoints(self) -> bool:
        return self.lam_i is not None and self.lam_s is not None

    @property
    def terminal_ignorants(self) -> float:
        return float(self.i[-1])


def rk4_step(i, s, h: float, beta0, beta_mid, beta1, u0, u_mid, u1, gamma: float, alpha: float):
    """One classical RK4 step of the controlled state; works elementwise on numpy arrays too."""
    k1i, k1s = state_derivatives(i, s, beta0, u0, gamma, alpha)
    k2i, k2s = state_derivatives(i + 0.5 * h * k1i, s + 0.5 * h * k1s, beta_mid, u_mid, gamma, alpha)
    k3i, k3s = state_derivatives(i + 0.5 * h * k2i, s + 0.5 * h * k2s, beta_mid, u_mid, gamma, alpha)
    k4i, k4s = state_derivatives(i + h * k3i, s + h * k3s, beta1, u1, gamma, alpha)
    i_next = i + h / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i)
    s_next = s + h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
    return i_next, s_next


def _clamp_fraction(value: float, name: str, t: float) -> tuple[float, bool]:
    if 0.0 <= value <= 1.0:
        return value, False
    if -CLAMP_BAND <= value < 0.0:
        return 0.0, True
    if 1.0 < value <= 1.0 + CLAMP_BAND:
        return 1.0, True
    raise IntegrationError(f"{name}={value!r} left [0, 1] at t={t:.6g}; step size too coarse")


def _check_grid(u: ControlSignal, grid: TimeGrid) -> None:
    if u.grid != grid:
        raise ValueError(f"control grid {u.grid} does not match integration grid {grid}")


def _spend_channel(u_values: np.ndarray, h: float, cost: CostFunction) -> np.ndarray:
    # RK4 on db/dt = c(u(t)) with linearly interpolated u reduces to Simpson's rule per step.
    u_mid = 0.5 * (u_values[:-1] + u_values[1:])
    c_nodes = np.asarray(cost.evaluate(u_values), dtype=float)
    c_mid = np.asarray(cost.evaluate(u_mid), dtype=float)
    increments = h / 6.0 * (c_nodes[:-1] + 4.0 * c_mid + c_nodes[1:])
    return np.concatenate(([0.0], np.cumsum(increments)))


def integrate_forward(p: EpidemicParams, u: ControlSignal, grid: TimeGrid, cost: CostFunction | None = None) -> Trajectory:
    _check_grid(u, grid)
    cost = cost or quadratic_cost()
    h = grid.h
    n = grid.n_steps
    times = grid.times
    beta_nodes = np.asarray(p.beta(times), dtype=float).tolist()
    beta_mid = np.asarray(p.beta(grid.midpoints), dtype=float).tolist()
    u_nodes = u.values.tolist()
    u_mid = (0.5 * (u.values[:-1] + u.values[1:])).tolist()
    gamma, alpha = p.gamma, p.alpha

    i_out = [0.0] * (n + 1)
    s_out = [0.0] * (n + 1)
    i, s = 1.0 - p.s0, p.s0
    i_out[0], s_out[0] = i, s
    clamped = 0
    for k in range(n):
        i, s = rk4_step(i, s, h, beta_nodes[k], beta_mid[k], beta_nodes[k + 1], u_nodes[k], u_mid[k], u_nodes[k + 1], gamma, alpha)
        t_next = (k + 1) * h
        i, hit_i = _clamp_fraction(i, "i", t_next)
        s, hit_s = _clamp_fraction(s, "s", t_next)
        if i + s > 1.0:
            if i + s > 1.0 + CLAMP_BAND:
                raise IntegrationError(f"i+s={i + s!r} exceeds 1 at t={t_next:.6g}; step size too coarse")
            s = 1.0 - i
            hit_s = True
        clamped += hit_i + hit_s
        i_out[k + 1], s_out[k + 1] = i, s

    if clamped:
        logger.debug("forward integration clamped %d state samples into [0, 1]", clamped)
    return Trajectory(
        grid=grid,
        i=np.array(i_out),
        s=np.array(s_out),
        b=_spend_channel(u.values, h, cost),
        clamped=clamped,
    )


def _adjoint_rhs(lam_i: float, lam_s: float, i: float, s: float, beta: float, u: float, gamma: float, alpha: float) -> tuple[float, float]:
    dlam_i = lam_i * (beta * s + u) - lam_s * ((beta + gamma) * s + u - alpha * u)
    dlam_s = lam_i * beta * i - lam_s * ((beta + gamma) * i - gamma - alpha * u)
    return dlam_i, dlam_s


def integrate_adjoint_backward(p: EpidemicParams, u: ControlSignal, state: Trajectory, grid: TimeGrid) -> Trajectory:
    _check_grid(u, grid)
    if state.grid != grid:
        raise ValueError(f"state grid {state.grid} does not match integration grid {grid}")
    h = grid.h
    n = grid.n_steps
    beta_nodes = np.asarray(p.beta(grid.times), dtype=float).tolist()
    beta_mid = np.asarray(p.beta(grid.midpoints), dtype=float).tolist()
    u_nodes = u.values.tolist()
    u_mid = (0.5 * (u.values[:-1] + u.values[1:])).tolist()
    i_nodes = state.i.tolist()
    s_nodes = state.s.tolist()
    i_mid = (0.5 * (state.i[:-1] + state.i[1:])).tolist()
    s_mid = (0.5 * (state.s[:-1] + state.s[1:])).tolist()
    gamma, alpha = p.gamma, p.alpha

    lam_i_out = [0.0] * (n + 1)
    lam_s_out = [0.0] * (n + 1)
    # Transversality: J = i(T).
    li, ls = 1.0, 0.0
    lam_i_out[n], lam_s_out[n] = li, ls
    for k in range(n, 0, -1):
        m = k - 1
        k1i, k1s = _adjoint_rhs(li, ls, i_nodes[k], s_nodes[k], beta_nodes[k], u_nodes[k], gamma, alpha)
        k2i, k2s = _adjoint_rhs(li - 0.5 * h * k1i, ls - 0.5 * h * k1s, i_mid[m], s_mid[m], beta_mid[m], u_mid[m], gamma, alpha)
        k3i, k3s = _adjoint_rhs(li - 0.5 * h * k2i, ls - 0.5 * h * k2s, i_mid[m], s_mid[m], beta_mid[m], u_mid[m], gamma, alpha)
        k4i, k4s = _adjoint_rhs(li - h * k3i, ls - h * k3s, i_nodes[m], s_nodes[m], beta_nodes[m], u_nodes[m], gamma, alpha)
        li = li - h / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i)
        ls = ls - h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
        lam_i_out[m], lam_s_out[m] = li, ls

    lam_i = np.array(lam_i_out)
    lam_s = np.array(lam_s_out)
    if not (np.all(np.isfinite(lam_i)) and np.all(np.isfinite(lam_s))):
        raise IntegrationError("adjoint integration produced non-finite values")
    return replace(state, lam_i=lam_i, lam_s=lam_s)


def integrate_uncontrolled_full(p: EpidemicParams, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    h = grid.h
    times = grid.times
    i, s, r = 1.0 - p.s0, p.s0, 0.0
    out = np.empty((grid.n_steps + 1, 3))
    out[0] = (i, s, r)
    for k in range(grid.n_steps):
        t = times[k]
        k1 = uncontrolled_rhs_full(i, s, r, t, p)
        k2 = uncontrolled_rhs_full(i + 0.5 * h * k1[0], s + 0.5 * h * k1[1], r + 0.5 * h * k1[2], t + 0.5 * h, p)
        k3 = uncontrolled_rhs_full(i + 0.5 * h * k2[0], s + 0.5 * h * k2[1], r + 0.5 * h * k2[2], t + 0.5 * h, p)
        k4 = uncontrolled_rhs_full(i + h * k3[0], s + h * k3[1], r + h * k3[2], t + h, p)
        i += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        s += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        r += h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        if not all(math.isfinite(v) for v in (i, s, r)):
            raise IntegrationError(f"three-compartment integration diverged at t={t:.6g}")
        out[k + 1] = (i, s, r)
    return out[:, 0], out[:, 1], out[:, 2]
