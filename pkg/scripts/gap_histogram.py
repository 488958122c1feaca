"""Per-instance gap distribution at one throughput level, with a text histogram.

    python3 scripts/gap_histogram.py --kappa 0.9 --count 100 --out results/hist.csv
"""

import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from switchfluid.experiments import batch_histogram


@dataclass
class HistogramConfig:
    n: int = 3
    kappa: float = 0.9
    count: int = 100
    master_seed: int = 0
    weight_mode: str = "queue"
    workers: int = 1
    bins: int = 12
    out: Path = Path("results/gap_histogram.csv")


def run(cfg: HistogramConfig):
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    reports, summary = batch_histogram(cfg.n, cfg.kappa, cfg.count, seed=cfg.master_seed,
                                       weight_mode=cfg.weight_mode, workers=cfg.workers,
                                       out_csv=cfg.out)
    gaps = np.array([r.relative_gap for r in reports])
    gaps = gaps[np.isfinite(gaps)]
    if gaps.size:
        counts, edges = np.histogram(gaps, bins=cfg.bins)
        width = max(counts.max(), 1)
        for c, lo, hi in zip(counts, edges, edges[1:]):
            print(f"[{lo:7.3f}, {hi:7.3f}) {c:4d} {'#' * int(round(40 * c / width))}")
    print(f"drained {summary.drained}/{summary.count}  mean={summary.mean_gap:.4f}  "
          f"median={summary.median_gap:.4f}  q10={summary.q10:.4f}  q90={summary.q90:.4f}  "
          f"share>=10%={summary.frac_at_least_10pct:.2f}")
    return reports, summary


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--kappa", type=float, default=0.9)
    ap.add_argument("--count", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--weight-mode", choices=["queue", "cq"], default="queue")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--bins", type=int, default=12)
    ap.add_argument("--out", type=Path, default=HistogramConfig.out)
    a = ap.parse_args()
    run(HistogramConfig(a.n, a.kappa, a.count, a.seed, a.weight_mode, a.workers, a.bins, a.out))


if __name__ == "__main__":
    main()
