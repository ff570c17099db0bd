from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from campaignopt.control import ControlSignal
from campaignopt.integrator import TimeGrid, Trajectory
from campaignopt.model import STATE_TOLERANCE

TRAJECTORY_COLUMNS = ["t", "i", "s", "r", "u", "b", "lambda_i", "lambda_s"]
SWEEP_COLUMNS = ["param_value", "J_optimal", "J_static", "J_nocontrol", "spend_optimal", "bisect_iters"]
BASELINE_COLUMNS = ["strategy", "J", "spend", "u_level"]
ORACLE_COLUMNS = ["method", "J", "spend", "levels"]


def fmt(value: float | int | None) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".12g")


def _prepare(path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    return target


def _write_rows(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
    target = _prepare(path)
    with target.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    return target


def write_trajectory_csv(path: str | Path, state: Trajectory, u: ControlSignal) -> Path:
    n = state.grid.n_steps + 1
    lam_i = state.lam_i if state.lam_i is not None else np.full(n, np.nan)
    lam_s = state.lam_s if state.lam_s is not None else np.full(n, np.nan)
    columns = (state.t, state.i, state.s, state.r, u.values, state.b, lam_i, lam_s)
    rows = ([fmt(c[k]) if np.isfinite(c[k]) else "" for c in columns] for k in range(n))
    return _write_rows(path, TRAJECTORY_COLUMNS, rows)


def _read_table(path: str | Path, required: Sequence[str]) -> dict[str, np.ndarray]:
    with Path(path).open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing column(s) {','.join(missing)}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    table: dict[str, np.ndarray] = {}
    for column in reader.fieldnames or []:
        try:
            table[column] = np.array([float(r[column]) if r[column] != "" else np.nan for r in rows])
        except ValueError:
            raise ValueError(f"{path}: non-numeric value in column {column!r}") from None
    return table


def read_trajectory_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Read a trajectory CSV back and check the state invariants row by row."""
    table = _read_table(path, TRAJECTORY_COLUMNS)
    i, s, r = table["i"], table["s"], table["r"]
    if np.any(i < 0) or np.any(s < 0) or np.any(r < -STATE_TOLERANCE):
        raise ValueError(f"{path}: negative state fraction")
    if np.any(np.abs(i + s + r - 1.0) > STATE_TOLERANCE):
        raise ValueError(f"{path}: i + s + r deviates from 1")
    if np.any(np.diff(table["t"]) <= 0):
        raise ValueError(f"{path}: time column is not strictly increasing")
    if np.any(np.diff(table["b"]) < -STATE_TOLERANCE):
        raise ValueError(f"{path}: cumulative spend decreases")
    return table


def read_control_csv(path: str | Path, grid: TimeGrid) -> ControlSignal:
    table = _read_table(path, ["t", "u"])
    t, u = table["t"], table["u"]
    if np.any(~np.isfinite(t)) or np.any(~np.isfinite(u)):
        raise ValueError(f"{path}: control file has empty or non-finite samples")
    if np.any(np.diff(t) <= 0):
        raise ValueError(f"{path}: time column is not strictly increasing")
    if t[0] > 1e-9 * grid.T or t[-1] < grid.T * (1 - 1e-9):
        raise ValueError(f"{path}: control covers [{t[0]}, {t[-1]}], need [0, {grid.T}]")
    return ControlSignal(grid, np.interp(grid.times, t, u))


def write_sweep_csv(path: str | Path, rows: Sequence) -> Path:
    return _write_rows(
        path,
        SWEEP_COLUMNS,
        (
            [fmt(r.param_value), fmt(r.J_optimal), fmt(r.J_static), fmt(r.J_nocontrol), fmt(r.spend_optimal), fmt(r.bisect_iters)]
            for r in rows
        ),
    )


def write_baseline_csv(path: str | Path, rows: Sequence[tuple[str, float, float, float]]) -> Path:
    return _write_rows(path, BASELINE_COLUMNS, ([name, fmt(j), fmt(spend), fmt(level)] for name, j, spend, level in rows))


def write_oracle_report(path: str | Path, rows: Sequence[tuple[str, float, float, Sequence[float]]]) -> Path:
    return _write_rows(
        path,
        ORACLE_COLUMNS,
        ([method, fmt(j), fmt(spend), " ".join(fmt(v) for v in levels)] for method, j, spend, levels in rows),
    )
