"""Sweep the throughput level and record the max-weight cost gap at each level.

    python3 scripts/gap_trend.py --n 3 --count 30 --out results/gap_trend.csv
"""

import argparse
import csv
from dataclasses import dataclass, field
from pathlib import Path

from switchfluid.experiments import batch_histogram, instance_seeds


@dataclass
class TrendConfig:
    n: int = 3
    kappas: list = field(default_factory=lambda: [0.5, 0.7, 0.8, 0.9, 0.95])
    count: int = 30
    master_seed: int = 0
    weight_mode: str = "queue"
    workers: int = 1
    out: Path = Path("results/gap_trend.csv")


def run(cfg: TrendConfig) -> list:
    # the same seeds at every level, so only the load changes between rows
    seeds = instance_seeds(cfg.master_seed, cfg.count)
    rows = []
    for kappa in cfg.kappas:
        _, s = batch_histogram(cfg.n, kappa, cfg.count, seeds=seeds,
                               weight_mode=cfg.weight_mode, workers=cfg.workers)
        rows.append([kappa, s.count, s.drained, s.mean_gap, s.median_gap, s.q10, s.q90,
                     s.frac_at_least_10pct])
        print(f"kappa={kappa:.2f} mean={s.mean_gap:.4f} median={s.median_gap:.4f} "
              f"share>=10%={s.frac_at_least_10pct:.2f}")
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    with open(cfg.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kappa", "count", "drained", "mean_gap", "median_gap", "q10", "q90",
                    "frac_at_least_10pct"])
        w.writerows(rows)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--kappas", type=float, nargs="+", default=TrendConfig().kappas)
    ap.add_argument("--count", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--weight-mode", choices=["queue", "cq"], default="queue")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=TrendConfig.out)
    a = ap.parse_args()
    run(TrendConfig(a.n, a.kappas, a.count, a.seed, a.weight_mode, a.workers, a.out))


if __name__ == "__main__":
    main()
