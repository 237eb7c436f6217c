"""Command line front end.

Subcommands: simulate (closed-loop run with CSV log), bench (solver timing
on a replay), tune (particle swarm over controller weights), model-check
(dynamics validation suites) and tracks (geometry export).

Exit codes: 0 success, 1 configuration error, 2 solver hard failure,
3 instability detected during the run.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np


def _cmd_simulate(args) -> int:
    from .config import ConfigError, load_scenario
    from .harness import run_scenario

    try:
        spec = load_scenario(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        run = run_scenario(spec, csv_path=args.out)
    except Exception as exc:  # solver hard failure
        print(f"run aborted: {exc}", file=sys.stderr)
        return 2
    print(f"{spec.name}: {len(run.data['t'])} ticks, "
          f"rmse {run.rmse * 1e3:.4f} mm"
          + (f", braking distance {run.braking_distance:.1f} m"
             if run.braking_distance is not None else ""))
    if len(run.solve_times):
        print(f"solves: {len(run.solve_times)}, median "
              f"{1e3 * float(np.median(run.solve_times)):.2f} ms, "
              f"deadline misses {run.deadline_misses}")
    if args.out:
        print(f"log written to {args.out}")
    if run.unstable:
        print("unstable contact detected", file=sys.stderr)
        return 3
    return 0


def _cmd_bench(args) -> int:
    from .config import ConfigError, load_scenario
    from .harness import bench_solvers

    try:
        spec = load_scenario(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    rep = bench_solvers(spec, n_solves=args.n)
    for name, stats in (("nonlinear", rep.nmpc), ("linear time-varying", rep.ltv)):
        print(f"{name}: mean {1e3 * stats['mean']:.2f} ms, "
              f"median {1e3 * stats['median']:.2f} ms, "
              f"p95 {1e3 * stats['p95']:.2f} ms")
    print(f"median ratio ltv/nmpc: {rep.ratio_median:.3f}")
    print(f"nmpc iterations warm {rep.nmpc_iters_warm:.2f} "
          f"/ cold {rep.nmpc_iters_cold:.2f}")
    return 0


def _cmd_tune(args) -> int:
    from .config import ConfigError, load_design_space, load_scenario
    from .harness import tune_pso

    try:
        space = load_design_space(args.space)
        scenarios = [load_scenario(p) for p in args.scenarios]
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    res = tune_pso(space, scenarios, n_particles=args.particles,
                   n_iters=args.iters, seed=args.seed)
    if res.all_infeasible:
        print("all particles infeasible; returning the space center",
              file=sys.stderr)
    for name, val in res.best.items():
        print(f"{name} = {val:.6g}")
    print(f"cost = {res.best_cost:.6g}")
    return 0


def _cmd_model_check(args) -> int:
    from .validation import model_check

    return 0 if model_check(verbose=True) else 2


def _cmd_tracks(args) -> int:
    from .track import build_track, standard_track_spec

    if args.action != "export":
        print("tracks supports: export", file=sys.stderr)
        return 1
    try:
        spec = standard_track_spec(args.track, total_length=args.length)
        geo = build_track(spec)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    geo.export_csv(args.out)
    print(f"{args.track}: {geo.p.size} knots over {geo.total_length:.1f} m "
          f"written to {args.out}")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="irwsim",
        description="Closed-loop simulation and integrated control of rail "
                    "running gears with independently rotating wheels.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write a CSV log")
    p.add_argument("config", help="scenario TOML file")
    p.add_argument("--out", default=None, help="CSV log path")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("bench", help="solver timing on a closed-loop replay")
    p.add_argument("config", help="scenario TOML file")
    p.add_argument("--n", type=int, default=500, help="number of solves")
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("tune", help="particle swarm over controller weights")
    p.add_argument("space", help="design space TOML file")
    p.add_argument("scenarios", nargs="+", help="scenario TOML files")
    p.add_argument("--particles", type=int, default=8)
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_tune)

    p = sub.add_parser("model-check", help="run the dynamics validation suites")
    p.set_defaults(fn=_cmd_model_check)

    p = sub.add_parser("tracks", help="evaluation track utilities")
    p.add_argument("action", choices=["export"])
    p.add_argument("--track", default="T3", help="track id T1..T5")
    p.add_argument("--length", type=float, default=2500.0)
    p.add_argument("--out", default="track.csv")
    p.set_defaults(fn=_cmd_tracks)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
