from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from campaignopt.baselines import evaluate_strategy, no_control, static_control, static_level
from campaignopt.config import ScenarioConfig, apply_overrides, load_config
from campaignopt.errors import SolverError
from campaignopt.experiments import Scenario, SweepSpec, catalog_sweep_spec, run_parameter_sweep
from campaignopt.export import (
    read_control_csv,
    write_baseline_csv,
    write_oracle_report,
    write_sweep_csv,
    write_trajectory_csv,
)
from campaignopt.integrator import integrate_adjoint_backward, integrate_forward
from campaignopt.oracle import evaluate_piecewise, oracle_search, project_to_piecewise
from campaignopt.sweep import solve_optimal

DEFAULT_OUTPUT_DIR = Path("outputs")
COMMANDS = ("solve", "simulate", "baseline", "sweep", "oracle")


def _err(message: str) -> None:
    print(message, file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="campaignopt")
    parser.add_argument("--verbose", action="store_true", help="Log solver diagnostics at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", default=None, help="Scenario file with 'key = value' lines")
        cmd.add_argument("--out", default=None, help=f"Output CSV (default: {DEFAULT_OUTPUT_DIR}/{name}.csv)")
        cmd.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="Override one config key; repeatable, applied after --config",
        )
        if name == "sweep":
            cmd.add_argument("--study", default=None, help="Parameter study from the shipped catalog (e.g. gamma)")
    return parser


def _resolve_out(args: argparse.Namespace, cfg: ScenarioConfig) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.out:
        return Path(cfg.out)
    return DEFAULT_OUTPUT_DIR / f"{args.command}.csv"


def _cmd_solve(cfg: ScenarioConfig, out: Path) -> int:
    result = solve_optimal(cfg.to_params(), cfg.to_budget(), cfg.to_sweep_config())
    target = write_trajectory_csv(out, result.state, result.control)
    diag = result.diagnostics
    detail = f"shortcut={diag.shortcut}" if diag.shortcut else f"bisections={diag.bisection_iterations}"
    _err(f"[solve] J={result.J:.6f} spend={result.spend:.6g} B={cfg.budget:.6g} lambda_b={result.lambda_b:.6g} {detail}")
    if not diag.inner_converged:
        _err("[solve] warning: inner sweep did not converge at the final multiplier")
    _err(f"[solve] wrote {target}")
    return 0


def _cmd_simulate(cfg: ScenarioConfig, out: Path) -> int:
    if not cfg.control_file:
        raise ValueError("simulate needs control_file (set it in the config or with --set control_file=PATH)")
    p = cfg.to_params()
    grid = cfg.grid()
    u = read_control_csv(cfg.control_file, grid)
    u.check_admissible(cfg.u_max)
    state = integrate_adjoint_backward(p, u, integrate_forward(p, u, grid, cfg.cost), grid)
    target = write_trajectory_csv(out, state, u)
    _err(f"[simulate] J={state.terminal_ignorants:.6f} spend={state.b[-1]:.6g} B={cfg.budget:.6g}")
    _err(f"[simulate] wrote {target}")
    return 0


def _cmd_baseline(cfg: ScenarioConfig, out: Path) -> int:
    p = cfg.to_params()
    budget = cfg.to_budget()
    grid = cfg.grid()
    level = static_level(budget, p.T)
    j_static, spend_static = evaluate_strategy(p, static_control(budget, p.T, grid), grid, budget.cost)
    j_none, spend_none = evaluate_strategy(p, no_control(grid), grid, budget.cost)
    target = write_baseline_csv(
        out,
        [
            ("static", j_static, spend_static, level),
            ("no_control", j_none, spend_none, 0.0),
        ],
    )
    _err(f"[baseline] static J={j_static:.6f} (u={level:.6g}) no_control J={j_none:.6f}")
    _err(f"[baseline] wrote {target}")
    return 0


def _sweep_spec(cfg: ScenarioConfig, study: str | None) -> SweepSpec:
    if study:
        if cfg.sweep_param:
            raise ValueError("give either --study or sweep_param, not both")
        return catalog_sweep_spec(study, cfg)
    if not cfg.sweep_param:
        raise ValueError("sweep needs sweep_param and sweep_values, or --study NAME")
    return SweepSpec(parameter=cfg.sweep_param, values=cfg.sweep_values, base=Scenario.from_config(cfg))


def _cmd_sweep(cfg: ScenarioConfig, out: Path, study: str | None) -> int:
    spec = _sweep_spec(cfg, study)
    _err(f"[sweep] parameter={spec.parameter} rows={len(spec.values)} workers={cfg.workers}")

    def _progress(done: int, total: int) -> None:
        if done == 1 or done % 5 == 0 or done == total:
            _err(f"[sweep] progress {done}/{total}")

    rows = run_parameter_sweep(spec, workers=cfg.workers, progress=_progress)
    target = write_sweep_csv(out, rows)
    failed = [r for r in rows if not r.ok]
    for row in failed:
        _err(f"[sweep] {spec.parameter}={row.param_value:g} failed: {row.error}")
    _err(f"[sweep] complete: {len(rows) - len(failed)}/{len(rows)} rows solved, wrote {target}")
    return 0


def _cmd_oracle(cfg: ScenarioConfig, out: Path) -> int:
    p = cfg.to_params()
    budget = cfg.to_budget()
    grid = cfg.grid()
    found = oracle_search(p, budget, cfg.n_segments, cfg.n_levels, n_steps=cfg.n_steps, workers=cfg.workers)
    result = solve_optimal(p, budget, cfg.to_sweep_config())
    projected = project_to_piecewise(result.control, budget, cfg.n_segments)
    j_projected = evaluate_piecewise(p, projected, cfg.n_steps)
    level = static_level(budget, p.T)
    j_static, spend_static = evaluate_strategy(p, static_control(budget, p.T, grid), grid, budget.cost)
    target = write_oracle_report(
        out,
        [
            ("oracle", found.J, found.control.spend(budget), found.control.levels),
            ("sweep", result.J, result.spend, ()),
            ("sweep_projected", j_projected, projected.spend(budget), projected.levels),
            ("static", j_static, spend_static, (level,)),
        ],
    )
    _err(
        f"[oracle] J_oracle={found.J:.6f} J_sweep={result.J:.6f} J_static={j_static:.6f} "
        f"candidates={found.n_feasible}/{found.n_candidates}"
    )
    if result.J > found.J + 1e-3:
        _err("[oracle] warning: sweep solution is worse than the brute-force optimum")
    _err(f"[oracle] wrote {target}")
    return 0


def _dispatch(args: argparse.Namespace) -> int:
    cfg = apply_overrides(load_config(args.config), args.overrides)
    out = _resolve_out(args, cfg)
    if args.command == "solve":
        return _cmd_solve(cfg, out)
    if args.command == "simulate":
        return _cmd_simulate(cfg, out)
    if args.command == "baseline":
        return _cmd_baseline(cfg, out)
    if args.command == "sweep":
        return _cmd_sweep(cfg, out, args.study)
    if args.command == "oracle":
        return _cmd_oracle(cfg, out)
    raise ValueError(f"unknown command {args.command!r}")


def run_command(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed usage; usage errors count as validation errors.
        return 0 if exc.code == 0 else 1

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _dispatch(args)
    except SolverError as exc:
        _err(f"Error: {exc}")
        return 2
    except (ValueError, OSError) as exc:
        _err(f"Error: {exc}")
        return 1


def main(argv: list[str] | None = None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    raise SystemExit(main())
