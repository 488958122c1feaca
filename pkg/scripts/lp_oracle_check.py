"""Compare the threshold-policy cost with a time-discretized control LP.

The LP lives in the test oracles, so this script adds ``tests/`` to the path.

    python3 scripts/lp_oracle_check.py --seeds 0 20 --scale 0.1 --out results/lp_check.csv
"""

import argparse
import csv
import sys
import time
from dataclasses import dataclass
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from oracles import discretized_control_lp  # noqa: E402

from switchfluid.experiments import generate_instance  # noqa: E402
from switchfluid.optimal_control import compute_trajectory, trajectory_cost  # noqa: E402
from switchfluid.switch_model import enumerate_basic_schedules  # noqa: E402


@dataclass
class OracleConfig:
    n: int = 2
    kappa: float = 0.7
    first_seed: int = 0
    last_seed: int = 20
    scale: float = 0.1  # multiplies q0; full-size instances need ~40k LP steps
    delta: float = 1e-2
    out: Path = Path("results/lp_oracle_check.csv")


def run(cfg: OracleConfig) -> list:
    sset = enumerate_basic_schedules(cfg.n)
    rows = []
    for seed in range(cfg.first_seed, cfg.last_seed):
        base = generate_instance(cfg.n, cfg.kappa, seed)
        inst = base.with_q0(base.q0 * cfg.scale)
        t0 = time.perf_counter()
        traj = compute_trajectory(inst, sset=sset)
        ours = trajectory_cost(traj)
        ref, _, _ = discretized_control_lp(inst, sset.A, 1.05 * traj.drain_time + 1.0, cfg.delta)
        tol = 10 * cfg.delta * inst.cost.sum() * inst.q0.sum()
        rows.append([seed, traj.drain_time, ours, ref, ours - ref, tol, abs(ours - ref) <= tol])
        print(f"seed {seed:3d} T={traj.drain_time:8.3f} ours={ours:10.4f} lp={ref:10.4f} "
              f"diff={ours - ref:+9.4f} tol={tol:8.4f} ({time.perf_counter() - t0:.1f}s)")
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    with open(cfg.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "drain_time", "cost_threshold", "cost_lp", "diff", "tol", "within"])
        w.writerows(rows)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2)
    ap.add_argument("--kappa", type=float, default=0.7)
    ap.add_argument("--seeds", type=int, nargs=2, default=[0, 20], metavar=("FIRST", "STOP"))
    ap.add_argument("--scale", type=float, default=0.1)
    ap.add_argument("--delta", type=float, default=1e-2)
    ap.add_argument("--out", type=Path, default=OracleConfig.out)
    a = ap.parse_args()
    run(OracleConfig(a.n, a.kappa, a.seeds[0], a.seeds[1], a.scale, a.delta, a.out))


if __name__ == "__main__":
    main()
