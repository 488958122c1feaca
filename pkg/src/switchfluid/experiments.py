"""Random instances at fixed throughput, optimal-vs-baseline comparisons, batch runs."""

from __future__ import annotations

import csv
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .baselines import CmuPolicy, MaxWeightPolicy, WeightMode, simulate_discretized_policy
from .optimal_control import compute_trajectory, trajectory_cost
from .switch_model import Instance, enumerate_basic_schedules

log = logging.getLogger(__name__)

LAMBDA_DISTRIBUTION = "uniform(0,1)"
# baseline horizon when the optimal policy starts (and stays) empty
FALLBACK_HORIZON = 10.0


class InvalidKappa(ValueError):
    pass


def generate_instance(n: int, kappa: float, seed: int) -> Instance:
    """Random n x n instance whose largest row/column arrival sum equals ``kappa``.

    The raw rates are drawn first, so the same seed at different kappa gives
    proportional arrival matrices with identical costs and initial fluid.
    """
    if not 0.0 < kappa < 1.0:
        raise InvalidKappa(f"kappa must lie in (0, 1), got {kappa!r}")
    rng = np.random.default_rng(seed)
    raw = rng.uniform(0.0, 1.0, size=(n, n))
    cost = rng.uniform(0.0, 1.0, size=(n, n))
    q0 = rng.integers(1, 101, size=(n, n)).astype(float)
    peak = max(raw.sum(axis=0).max(), raw.sum(axis=1).max())
    lam = kappa * raw / peak
    meta = {"seed": int(seed), "kappa": float(kappa), "lambda_distribution": LAMBDA_DISTRIBUTION}
    return Instance(n, lam, cost, q0, meta)


@dataclass
class ComparisonReport:
    seed: Optional[int]
    kappa: Optional[float]
    status: str  # "drained" or the trajectory status when it did not drain
    drain_time: float
    dt: float
    cost_opt: float
    cost_mw: dict = field(default_factory=dict)  # weight mode -> cost
    weight_mode: str = WeightMode.QUEUE.value
    cost_cmu: float = math.nan
    cost_mw_refined: float = math.nan  # selected mode at dt / 2
    artifacts: dict = field(default_factory=dict)

    @property
    def relative_gap(self) -> float:
        mw = self.cost_mw.get(self.weight_mode, math.nan)
        if self.status != "drained" or not self.cost_opt > 0:
            return math.nan
        return (mw - self.cost_opt) / self.cost_opt

    @property
    def refined_gap(self) -> float:
        if self.status != "drained" or not self.cost_opt > 0:
            return math.nan
        return (self.cost_mw_refined - self.cost_opt) / self.cost_opt

    def as_row(self) -> dict:
        row = {
            "seed": self.seed,
            "kappa": self.kappa,
            "status": self.status,
            "drain_time": self.drain_time,
            "dt": self.dt,
            "cost_opt": self.cost_opt,
            "weight_mode": self.weight_mode,
        }
        for mode in WeightMode:
            row[f"cost_mw_{mode.value}"] = self.cost_mw.get(mode.value, math.nan)
        row.update(cost_cmu=self.cost_cmu, cost_mw_refined=self.cost_mw_refined,
                   relative_gap=self.relative_gap, refined_gap=self.refined_gap)
        return row


REPORT_COLUMNS = list(ComparisonReport(None, None, "", 0.0, 0.0, 0.0).as_row())


def run_comparison(inst: Instance, dt: Optional[float] = None,
                   weight_mode=WeightMode.QUEUE, horizon: Optional[float] = None,
                   refine: bool = True, out_dir=None) -> ComparisonReport:
    """Optimal cost up to its drain time T against discretized baselines on [0, T].

    ``dt`` defaults to T / 1000. When T = 0 the baselines run on
    ``FALLBACK_HORIZON`` instead. A non-drained trajectory yields a report with
    that status and no costs.
    """
    mode = WeightMode(weight_mode)
    if dt is not None and dt <= 0:
        raise ValueError("dt must be positive")
    sset = enumerate_basic_schedules(inst.n)
    traj = compute_trajectory(inst, horizon=horizon, sset=sset)
    seed, kappa = inst.meta.get("seed"), inst.meta.get("kappa")
    if not traj.drained:
        log.warning("optimal trajectory did not drain (%s)", traj.status.value)
        return ComparisonReport(seed, kappa, traj.status.value, math.nan, dt or math.nan, math.nan,
                                weight_mode=mode.value)
    T = traj.drain_time
    span = T if T > 0 else FALLBACK_HORIZON
    dt = span * 1e-3 if dt is None else dt
    dt = min(dt, span)
    cost_opt = trajectory_cost(traj, until=T)
    costs = {}
    runs = {}
    for m in WeightMode:
        runs[m.value] = simulate_discretized_policy(inst, MaxWeightPolicy(inst, m, sset), dt, span, sset)
        costs[m.value] = runs[m.value].total_cost
    cmu_run = simulate_discretized_policy(inst, CmuPolicy(inst, sset), dt, span, sset)
    refined = math.nan
    if refine:
        refined = simulate_discretized_policy(inst, MaxWeightPolicy(inst, mode, sset), dt / 2,
                                              span, sset).total_cost
    report = ComparisonReport(seed, kappa, "drained", T, dt, cost_opt, costs, mode.value,
                              cmu_run.total_cost, refined)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"trajectory": out / "trajectory.csv", "max_weight": out / "max_weight.csv",
                 "cmu": out / "cmu.csv"}
        traj.write_csv(paths["trajectory"], t_max=span)
        runs[mode.value].write_csv(paths["max_weight"])
        cmu_run.write_csv(paths["cmu"])
        report.artifacts = {k: str(v) for k, v in paths.items()}
    return report


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else str(x)


def _atomic_write_rows(path, columns, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(row.get(c)) for c in columns])
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_reports_csv(reports, path) -> None:
    _atomic_write_rows(path, REPORT_COLUMNS, [r.as_row() for r in reports])


def instance_seeds(master_seed: int, count: int) -> list:
    """Per-instance seeds derived from one master seed."""
    children = np.random.SeedSequence(master_seed).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]


def _one(args) -> ComparisonReport:
    n, kappa, seed, dt, mode = args
    inst = generate_instance(n, kappa, seed)
    try:
        return run_comparison(inst, dt=dt, weight_mode=mode)
    except Exception as exc:  # recorded as a row; the batch keeps going
        log.error("instance seed=%d failed: %s", seed, exc)
        return ComparisonReport(seed, kappa, f"error: {type(exc).__name__}", math.nan,
                                dt or math.nan, math.nan, weight_mode=WeightMode(mode).value)


@dataclass
class BatchSummary:
    count: int
    drained: int
    mean_gap: float
    median_gap: float
    q10: float
    q90: float
    frac_at_least_10pct: float

    def as_dict(self) -> dict:
        return asdict(self)


def summarize(reports) -> BatchSummary:
    gaps = np.array([r.relative_gap for r in reports], dtype=float)
    ok = gaps[np.isfinite(gaps)]
    if ok.size == 0:
        return BatchSummary(len(reports), 0, *([math.nan] * 5))
    q10, q50, q90 = np.quantile(ok, [0.1, 0.5, 0.9])
    return BatchSummary(len(reports), int(ok.size), float(ok.mean()), float(q50), float(q10),
                        float(q90), float(np.mean(ok >= 0.10)))


def batch_histogram(n: int, kappa: float, num_instances: int, dt: Optional[float] = None,
                    seed: int = 0, weight_mode=WeightMode.QUEUE, workers: int = 1,
                    out_csv=None, seeds=None):
    """Compare ``num_instances`` random instances; returns (reports, summary).

    Instance seeds come from ``seeds`` if given, else from ``instance_seeds(seed, ...)``.
    Results are ordered by instance regardless of ``workers``.
    """
    if num_instances < 1:
        raise ValueError("num_instances must be >= 1")
    seeds = list(seeds) if seeds is not None else instance_seeds(seed, num_instances)
    jobs = [(n, kappa, s, dt, WeightMode(weight_mode).value) for s in seeds[:num_instances]]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_one, jobs))
    else:
        reports = [_one(j) for j in jobs]
    summary = summarize(reports)
    if out_csv is not None:
        write_reports_csv(reports, out_csv)
        s = summary.as_dict()
        _atomic_write_rows(Path(str(out_csv) + ".summary.csv"), list(s), [s])
    return reports, summary
