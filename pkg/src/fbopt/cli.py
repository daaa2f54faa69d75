"""Command-line front end.

Four subcommands: ``run`` executes one scenario and writes its trajectory
CSV; ``sweep`` expands a parameter grid over a base scenario; ``compare``
runs the projection controller and the primal-dual baseline from the same
scenario and prints a side-by-side summary; ``check`` validates a problem's
derivatives and prints its certificate constants.

Exit codes: 0 when every run converged (or the report completed cleanly),
2 when some run ended at the iteration budget or a certificate breach, and
1 on errors (bad inputs, solver failures, derivative mismatches).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .certificates import SamplerSpec, estimate_constants, sample_input_set
from .harness import GridSpec, RunStatus, load_scenario, run_trajectory, sweep, \
    write_csv, finite_difference_check
from .problems import get_problem, problem_names

__all__ = ["main"]


def _parse_grid_file(path) -> dict:
    """Parse a grid file: ``key = v1, v2, ...`` per line (scalar fields only)."""
    kinds = {"alpha": float, "gamma": float, "rho": float,
             "max_iters": int, "stationarity_tol": float, "seed": int}
    grid: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = v1, v2, ...")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in kinds:
                raise ValueError(f"{path}:{lineno}: unknown grid key {key!r}")
            grid[key] = [kinds[key](part) for part in value.split(",")]
    return grid


def _summary_line(label: str, log) -> str:
    last = log.num_rows - 1
    status = log.status.value if log.status is not None else "?"
    u_txt = ", ".join(f"{v:.6g}" for v in log.u[last])
    return (f"{label:>10}  {status:<19} iters={int(log.iters[last]):>6} "
            f"residual={log.residual[last]:.3e} V={log.V[last]:.6g} "
            f"max_violation={log.max_violation[last]:.3e} u=({u_txt})")


def _status_code(statuses) -> int:
    if any(s is RunStatus.ERROR for s in statuses):
        return 1
    if all(s is RunStatus.CONVERGED for s in statuses):
        return 0
    return 2


def _cmd_run(args) -> int:
    config = load_scenario(args.scenario)
    if isinstance(config.u0, GridSpec):
        print("error: run needs a concrete u0; use sweep for grid starts",
              file=sys.stderr)
        return 1
    out_dir = args.out or config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    log = run_trajectory(config)
    path = os.path.join(out_dir, "trajectory.csv")
    write_csv(log, path)
    print(_summary_line("run", log))
    if log.message:
        print(f"message: {log.message}")
    print(f"wrote {path}")
    return _status_code([log.status])


def _cmd_sweep(args) -> int:
    config = load_scenario(args.scenario)
    grid = _parse_grid_file(args.grid) if args.grid else {}
    out_dir = args.out or config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    results = sweep(config, grid)
    statuses = []
    for i, (overrides, log) in enumerate(results):
        path = os.path.join(out_dir, f"run_{i:03d}.csv")
        write_csv(log, path)
        pieces = []
        for key in sorted(overrides):
            value = overrides[key]
            if isinstance(value, np.ndarray):
                value = "(" + ", ".join(f"{v:g}" for v in value) + ")"
            pieces.append(f"{key}={value}")
        print(_summary_line(f"run_{i:03d}", log) + "  [" + " ".join(pieces) + "]")
        statuses.append(log.status)
    print(f"wrote {len(results)} logs to {out_dir}")
    return _status_code(statuses)


def _cmd_compare(args) -> int:
    config = load_scenario(args.scenario)
    if config.scheme != "saddle":
        print("error: compare needs a saddle scenario (gamma and rho set); "
              "the projected twin is derived from it", file=sys.stderr)
        return 1
    if isinstance(config.u0, GridSpec):
        print("error: compare needs a concrete u0", file=sys.stderr)
        return 1
    projected = replace(config, scheme="projected", gamma=None, rho=None)
    log_p = run_trajectory(projected)
    log_s = run_trajectory(config)
    print(f"problem: {config.problem_name}  alpha={config.alpha:g}  "
          f"gamma={config.gamma:g}  rho={config.rho:g}")
    print(_summary_line("projected", log_p))
    print(_summary_line("saddle", log_s))
    return _status_code([log_p.status, log_s.status]) if args.strict else \
        (1 if RunStatus.ERROR in (log_p.status, log_s.status) else 0)


def _cmd_check(args) -> int:
    try:
        problem = get_problem(args.problem)
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    rng_spec = SamplerSpec(kind="random", count=args.points, seed=args.seed)
    points = sample_input_set(problem.input_set, rng_spec)
    report = finite_difference_check(problem, points)
    print(f"problem: {args.problem} (registered: {', '.join(problem_names())})")
    print(f"derivative check over {len(points)} random points:")
    print(f"  plant_jacobian      rel err {report.plant_jacobian:.3e}")
    print(f"  objective_gradient  rel err {report.objective_gradient:.3e}")
    print(f"  reduced_gradient    rel err {report.reduced_gradient:.3e}")
    constants = estimate_constants(problem, args.alpha)
    ell = ", ".join(f"{v:.6g}" for v in constants.output_lipschitz)
    print(f"certificate constants (estimated at alpha={args.alpha:g}):")
    print(f"  grad_lipschitz      {constants.grad_lipschitz:.6g}")
    print(f"  output_lipschitz    ({ell})")
    print(f"  multiplier_bound    {constants.multiplier_bound:.6g}")
    print(f"  metric_floor        {constants.metric_floor:.6g}")
    print(f"  step_size_bound     {constants.step_size_bound:.6g}")
    if report.max_error >= 1e-6:
        print("derivative check FAILED (relative error >= 1e-6)", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fbopt",
        description="Feedback-optimization toolkit: closed-loop runs, sweeps, "
                    "scheme comparison, and derivative/certificate checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario, write trajectory.csv")
    p_run.add_argument("--scenario", required=True, help="scenario file")
    p_run.add_argument("--out", default=None, help="output directory "
                       "(default: scenario's output_dir)")

    p_sweep = sub.add_parser("sweep", help="run a parameter grid over a scenario")
    p_sweep.add_argument("--scenario", required=True, help="base scenario file")
    p_sweep.add_argument("--grid", default=None,
                         help="grid file: key = v1, v2, ... per line")
    p_sweep.add_argument("--out", default=None, help="output directory")

    p_cmp = sub.add_parser("compare",
                           help="projected vs saddle from one saddle scenario")
    p_cmp.add_argument("--scenario", required=True, help="saddle scenario file")
    p_cmp.add_argument("--strict", action="store_true",
                       help="nonzero exit unless both schemes converge")

    p_chk = sub.add_parser("check",
                           help="derivative check + certificate constants")
    p_chk.add_argument("--problem", required=True,
                       help="registered problem name")
    p_chk.add_argument("--alpha", type=float, default=0.01,
                       help="step size for the multiplier-bound estimate")
    p_chk.add_argument("--points", type=int, default=100,
                       help="number of random check points")
    p_chk.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)
    handlers = {"run": _cmd_run, "sweep": _cmd_sweep,
                "compare": _cmd_compare, "check": _cmd_check}
    try:
        return handlers[args.command](args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
