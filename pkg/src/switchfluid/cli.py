"""Command-line entry point: ``switchfluid {gen,solve,compare,batch,verify,sim}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .baselines import WeightMode, max_weight_schedule
from .experiments import batch_histogram, generate_instance, run_comparison, write_reports_csv
from .optimal_control import build_certificate, compute_trajectory, trajectory_cost, verify_certificate
from .prelimit_sim import (
    FluidTrackingPolicy,
    scaled_distance_trace,
    scaled_instance,
    simulate_stochastic,
    write_distance_csv,
)
from .switch_model import Instance, enumerate_basic_schedules

EXIT_OK = 0
EXIT_VERIFY_FAILED = 2
EXIT_NOT_DRAINED = 3


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta", type=float, default=0.0, help="discount rate (default 0)")
    p.add_argument("--horizon", type=float, default=None, help="trajectory time cap")
    p.add_argument("--tol", type=float, default=1e-6, help="certificate tolerance")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="switchfluid", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", help="write a random instance")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--kappa", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", type=Path, default=None, help="instance file (stdout if omitted)")

    p = sub.add_parser("solve", help="optimal trajectory to CSV plus certificate report")
    p.add_argument("instance", type=Path)
    p.add_argument("-o", "--out", type=Path, default=Path("trajectory.csv"))
    p.add_argument("--samples", type=int, default=200)
    _common(p)

    p = sub.add_parser("verify", help="exit 0 iff the optimality certificate checks out")
    p.add_argument("instance", type=Path)
    _common(p)

    p = sub.add_parser("compare", help="optimal vs max-weight and c-mu")
    p.add_argument("instance", type=Path)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--weight-mode", choices=[m.value for m in WeightMode], default="queue")
    p.add_argument("-o", "--out", type=Path, default=Path("comparison.csv"))
    p.add_argument("--artifacts", type=Path, default=None, help="directory for run CSVs")
    p.add_argument("--horizon", type=float, default=None)

    p = sub.add_parser("batch", help="relative-gap table over random instances")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--kappa", type=float, default=0.9)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--weight-mode", choices=[m.value for m in WeightMode], default="queue")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--out", type=Path, default=Path("gaps.csv"))

    p = sub.add_parser("sim", help="scaled stochastic path against the fluid trajectory")
    p.add_argument("instance", type=Path)
    p.add_argument("--policy", choices=["fluid", "maxweight"], default="fluid")
    p.add_argument("--r", type=float, default=100.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--T", type=float, default=None, help="fluid time window (default: drain time)")
    p.add_argument("--step", type=int, default=1, help="write every step-th slot")
    p.add_argument("-o", "--out", type=Path, default=Path("distance.csv"))
    p.add_argument("--horizon", type=float, default=None)
    return ap


def _solve(args):
    inst = Instance.load_file(args.instance)
    traj = compute_trajectory(inst, horizon=args.horizon)
    return inst, traj


def _certify(traj, args) -> int:
    if not traj.drained:
        print(f"trajectory did not drain: {traj.status.value}", file=sys.stderr)
        return EXIT_NOT_DRAINED
    report = verify_certificate(traj, build_certificate(traj, args.beta), tol=args.tol)
    for cond, ok in report.summary().items():
        print(f"{cond}: {'pass' if ok else 'FAIL'}")
    for e in report.failures()[:10]:
        print(f"  {e.condition} segment {e.segment} t={e.t:.6g} residual={e.residual:.3g}")
    return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


def cmd_gen(args) -> int:
    inst = generate_instance(args.n, args.kappa, args.seed)
    if args.out is None:
        print(inst.dumps())
    else:
        inst.save(args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst, traj = _solve(args)
    traj.write_csv(args.out, num_samples=args.samples)
    print(f"status: {traj.status.value}")
    print(f"segments: {len(traj.segments)}")
    if traj.drained:
        print(f"drain_time: {traj.drain_time!r}")
        print(f"cost: {trajectory_cost(traj, beta=args.beta)!r}")
    return _certify(traj, args)


def cmd_verify(args) -> int:
    _, traj = _solve(args)
    return _certify(traj, args)


def cmd_compare(args) -> int:
    inst = Instance.load_file(args.instance)
    rep = run_comparison(inst, dt=args.dt, weight_mode=args.weight_mode, horizon=args.horizon,
                         out_dir=args.artifacts)
    write_reports_csv([rep], args.out)
    row = rep.as_row()
    print(json.dumps({k: (None if isinstance(v, float) and math.isnan(v) else v)
                      for k, v in row.items()}, indent=2))
    return EXIT_OK if rep.status == "drained" else EXIT_NOT_DRAINED


def cmd_batch(args) -> int:
    _, summary = batch_histogram(args.n, args.kappa, args.count, dt=args.dt, seed=args.seed,
                                 weight_mode=args.weight_mode, workers=args.workers,
                                 out_csv=args.out)
    print(json.dumps(summary.as_dict(), indent=2))
    return EXIT_OK


def cmd_sim(args) -> int:
    inst, traj = _solve(args)
    if not traj.drained and args.T is None:
        print("trajectory did not drain; pass --T", file=sys.stderr)
        return EXIT_NOT_DRAINED
    T = args.T if args.T is not None else max(traj.drain_time, 1.0)
    scaled = scaled_instance(inst, args.r)
    sset = enumerate_basic_schedules(inst.n)
    if args.policy == "fluid":
        policy = FluidTrackingPolicy(traj, args.r, args.seed)
    else:
        def policy(t, q):
            return max_weight_schedule(q, inst.n, sset=sset)
    slots = int(math.ceil(args.r * T)) + 1
    path = simulate_stochastic(scaled, policy, slots, args.seed, sset=sset)
    rows = scaled_distance_trace(path, args.r, traj, T, step=args.step)
    write_distance_csv(rows, inst.n, args.out)
    print(f"scaled distance: {max(r[-1] for r in rows)!r}")
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "solve": cmd_solve, "verify": cmd_verify, "compare": cmd_compare,
            "batch": cmd_batch, "sim": cmd_sim}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.cmd](args)


if __name__ == "__main__":
    sys.exit(main())
