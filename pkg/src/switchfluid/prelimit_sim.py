"""Slotted stochastic switch and fluid-scaling diagnostics.

Arrivals are Bernoulli(lam) per queue per slot and land at the start of the
slot, so a packet can leave in the slot it arrives. A policy picks a basic
schedule each slot from the pre-arrival queue; queues it would serve while
still empty are masked out, which keeps Q_t = Q_0 + A_t - D_t A >= 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .switch_model import Instance, ScheduleSet, enumerate_basic_schedules

# (slot, queue matrix) -> schedule index
SlotPolicy = Callable[[int, np.ndarray], int]


class ScaleMismatch(ValueError):
    pass


@dataclass(eq=False)
class SamplePath:
    horizon: int
    Q: np.ndarray  # (horizon + 1, n, n) int
    A_cum: np.ndarray  # (horizon + 1, n, n) int
    D_cum: np.ndarray  # (horizon + 1, |I|) int
    seed: int
    sset: ScheduleSet

    def identity_residual(self) -> int:
        """max |Q_t - (Q_0 + A_t - D_t A)| over all slots (exactly 0 for valid paths)."""
        n = self.Q.shape[1]
        served = (self.D_cum @ self.sset.A.astype(np.int64)).reshape(-1, n, n)
        return int(np.abs(self.Q - (self.Q[0] + self.A_cum - served)).max())


def _rng(seed: int, stream: int) -> np.random.Generator:
    # counter-based generator; independent streams via SeedSequence spawning
    ss = np.random.SeedSequence(seed).spawn(stream + 1)[stream]
    return np.random.Generator(np.random.Philox(ss))


def simulate_stochastic(inst: Instance, policy: SlotPolicy, slots: int, seed: int,
                        Q0=None, sset: Optional[ScheduleSet] = None) -> SamplePath:
    """Simulate ``slots`` slots. ``Q0`` defaults to ``inst.q0`` rounded to integers."""
    if slots < 1:
        raise ValueError("slots must be >= 1")
    sset = sset or enumerate_basic_schedules(inst.n)
    n = inst.n
    rng = _rng(seed, 0)
    Q0 = np.rint(inst.q0).astype(np.int64) if Q0 is None else np.asarray(Q0, dtype=np.int64)
    arrivals = (rng.random((slots, n, n)) < inst.lam).astype(np.int64)
    A_cum = np.zeros((slots + 1, n, n), dtype=np.int64)
    np.cumsum(arrivals, axis=0, out=A_cum[1:])
    Q = np.empty((slots + 1, n, n), dtype=np.int64)
    Q[0] = Q0
    counts = np.zeros(len(sset), dtype=np.int64)
    D_cum = np.zeros((slots + 1, len(sset)), dtype=np.int64)
    sched = sset.schedules
    for t in range(slots):
        q = Q[t]
        k = int(policy(t, q))
        avail = q + arrivals[t]
        served = [(i, j) for i, j in sched[k] if avail[i, j] > 0]
        if len(served) != len(sched[k]):
            k = sset.lookup(served)
        counts[k] += 1
        D_cum[t + 1] = counts
        nxt = avail
        for i, j in served:
            nxt[i, j] -= 1
        Q[t + 1] = nxt
    return SamplePath(slots, Q, A_cum, D_cum, seed, sset)


class FluidTrackingPolicy:
    """Each slot, sample a basic schedule from the fluid control at time slot / r."""

    def __init__(self, traj, r: float, seed: int):
        self.traj = traj
        self.r = float(r)
        self.rng = _rng(seed, 1)

    def __call__(self, t: int, q) -> int:
        mu = np.clip(self.traj.control_at(t / self.r), 0.0, None)
        u = self.rng.random() * mu.sum()
        return int(min(np.searchsorted(np.cumsum(mu), u, side="right"), len(mu) - 1))


def scaled_instance(inst: Instance, r: float) -> Instance:
    return inst.with_q0(np.rint(r * inst.q0))


def scaled_distance(path: SamplePath, r: float, fluid, T: Optional[float] = None) -> float:
    """sup over slot grid t = k/r in [0, T] of |Q_k / r - q_t|_1."""
    if T is None:
        T = path.horizon / r
    kmax = int(math.floor(r * T + 1e-9))
    if kmax > path.horizon:
        raise ScaleMismatch(f"path has {path.horizon} slots, needs {kmax} for r={r}, T={T}")
    return float(max(
        np.abs(path.Q[k] / r - fluid.state_at(k / r)).sum() for k in range(kmax + 1)
    ))


def scaled_distance_trace(path: SamplePath, r: float, fluid, T: float, step: int = 1):
    """Rows (t, scaled queue entries..., running distance) for CSV export."""
    rows = []
    worst = 0.0
    kmax = int(math.floor(r * T + 1e-9))
    if kmax > path.horizon:
        raise ScaleMismatch(f"path has {path.horizon} slots, needs {kmax}")
    for k in range(0, kmax + 1, step):
        scaled = path.Q[k] / r
        worst = max(worst, float(np.abs(scaled - fluid.state_at(k / r)).sum()))
        rows.append((k / r, *scaled.reshape(-1).tolist(), worst))
    return rows


def write_distance_csv(rows, n: int, path) -> None:
    from .optimal_control import queue_columns

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *queue_columns(n), "distance"])
        for row in rows:
            w.writerow([repr(float(x)) for x in row])
