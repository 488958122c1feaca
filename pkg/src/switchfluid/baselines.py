"""Max-weight and c-mu baselines, and a time-stepped fluid simulator for them."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from .switch_model import (
    EPS_FEAS,
    EPS_ZERO,
    Instance,
    ScheduleSet,
    enumerate_basic_schedules,
)

# a chooser maps the current fluid level (n x n) to a schedule index or a mixed schedule
Chooser = Callable[[np.ndarray], Union[int, np.ndarray]]


class WeightMode(str, enum.Enum):
    QUEUE = "queue"
    COST_TIMES_QUEUE = "cq"


class RequiresZeroStart(ValueError):
    pass


def _brute_argmax(weights_flat: np.ndarray, sset: ScheduleSet) -> int:
    # np.argmax returns the first maximizer, i.e. the earliest schedule in the ordering
    scores = sset.A @ weights_flat
    best = scores.max()
    return int(np.nonzero(scores >= best - 1e-12 * (1.0 + abs(best)))[0][0])


def _matching_argmax(weights: np.ndarray, sset: ScheduleSet) -> int:
    rows, cols = linear_sum_assignment(weights, maximize=True)
    served = [(int(i), int(j)) for i, j in zip(rows, cols) if weights[i, j] > 0]
    return sset.lookup(served)


def max_weight_schedule(q, n: Optional[int] = None, weight_mode=WeightMode.QUEUE,
                        cost=None, sset: Optional[ScheduleSet] = None) -> int:
    """Index of a maximum-weight basic schedule for queue weights q (or c*q).

    Brute force over the enumeration for n <= 3 (first maximizer wins), an
    assignment solve for larger n (only positive-weight pairs are served).
    """
    q = np.asarray(q, dtype=float)
    n = n or int(round(math.sqrt(q.size)))
    q = q.reshape(n, n)
    sset = sset or enumerate_basic_schedules(n)
    mode = WeightMode(weight_mode)
    if mode is WeightMode.COST_TIMES_QUEUE:
        if cost is None:
            raise ValueError("cost-weighted max-weight needs the cost matrix")
        weights = np.asarray(cost, dtype=float).reshape(n, n) * q
    else:
        weights = q
    if n <= 3:
        return _brute_argmax(weights.reshape(-1), sset)
    return _matching_argmax(weights, sset)


def cmu_schedule(q, inst: Instance, sset: Optional[ScheduleSet] = None) -> np.ndarray:
    """Greedy priority-by-cost mixed schedule.

    Queues are taken in decreasing cost (ties by queue index). Each queue
    joins already-allocated schedule pieces it is compatible with, in order,
    then takes fresh mass; an empty queue is capped at its arrival rate, a
    busy queue is not capped. Unallocated mass goes to the empty schedule.
    """
    sset = sset or enumerate_basic_schedules(inst.n)
    n = inst.n
    q = np.asarray(q, dtype=float).reshape(n, n)
    order = sorted(((i, j) for i in range(n) for j in range(n)),
                   key=lambda r: (-inst.cost[r], r))
    pieces: list = []  # [served set, mass]
    free = 1.0
    for i, j in order:
        target = inst.lam[i, j] if q[i, j] <= EPS_ZERO else 1.0
        if target <= 0:
            continue
        remaining = target
        new_pieces = []
        for served, mass in pieces:
            if remaining > EPS_FEAS and all(a != i and b != j for a, b in served):
                take = min(mass, remaining)
                new_pieces.append([served | {(i, j)}, take])
                if mass - take > EPS_FEAS:
                    new_pieces.append([served, mass - take])
                remaining -= take
            else:
                new_pieces.append([served, mass])
        pieces = new_pieces
        if remaining > EPS_FEAS and free > EPS_FEAS:
            take = min(free, remaining)
            pieces.append([frozenset({(i, j)}), take])
            free -= take
    mu = np.zeros(len(sset))
    for served, mass in pieces:
        mu[sset.lookup(served)] += mass
    mu[sset.empty_index] += max(free, 0.0)
    return mu


class MaxWeightPolicy:
    def __init__(self, inst: Instance, weight_mode=WeightMode.QUEUE,
                 sset: Optional[ScheduleSet] = None):
        self.inst = inst
        self.mode = WeightMode(weight_mode)
        self.sset = sset or enumerate_basic_schedules(inst.n)

    def __call__(self, q) -> int:
        return max_weight_schedule(q, self.inst.n, self.mode, self.inst.cost, self.sset)


class CmuPolicy:
    def __init__(self, inst: Instance, sset: Optional[ScheduleSet] = None):
        self.inst = inst
        self.sset = sset or enumerate_basic_schedules(inst.n)

    def __call__(self, q) -> np.ndarray:
        return cmu_schedule(q, self.inst, self.sset)


@dataclass
class DiscretizedRun:
    dt: float
    times: np.ndarray  # (steps + 1,)
    states: np.ndarray  # (steps + 1, n, n)
    total_cost: float
    schedule_log: list = field(default_factory=list)

    @property
    def samples(self) -> list:
        return list(zip(self.times.tolist(), self.states))

    def write_csv(self, path) -> None:
        import csv

        from .optimal_control import queue_columns

        n = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *queue_columns(n), "segment", "tau"])
            for k, (t, q) in enumerate(zip(self.times, self.states)):
                w.writerow([repr(float(t)), *(repr(float(x)) for x in q.reshape(-1)), k, ""])


def simulate_discretized_policy(inst: Instance, policy: Chooser, dt: float, T: float,
                                sset: Optional[ScheduleSet] = None) -> DiscretizedRun:
    """q_{k+1} = max(q_k + (lam - rate_k) dt, 0) with cost sum_k c . q_k dt (left sums).

    ``policy(q)`` may return a schedule index (served at full rate for the
    step) or a mixed schedule, whose rates mu A are used for the step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if T < dt:
        raise ValueError("T must be at least dt")
    sset = sset or enumerate_basic_schedules(inst.n)
    n = inst.n
    steps = int(math.ceil(T / dt - 1e-9))
    lam = inst.lam.reshape(-1)
    c = inst.cost.reshape(-1)
    q = inst.q0.reshape(-1).astype(float)
    states = np.empty((steps + 1, n * n))
    states[0] = q
    log = []
    total = 0.0
    for k in range(steps):
        total += float(c @ q) * dt
        choice = policy(q.reshape(n, n))
        if np.ndim(choice) == 0:
            idx = int(choice)
            rate = sset.A[idx]
        else:
            mu = np.asarray(choice, dtype=float)
            idx = int(np.argmax(mu))
            rate = mu @ sset.A
        log.append(idx)
        q = np.maximum(q + (lam - rate) * dt, 0.0)
        states[k + 1] = q
    times = np.arange(steps + 1) * dt
    return DiscretizedRun(dt, times, states.reshape(steps + 1, n, n), total, log)


def weak_stability_probe(inst: Instance, policy="optimal", T: float = 10.0,
                         dt: float = 1e-3, eps: Optional[float] = None) -> bool:
    """Does the policy keep an initially empty system empty on [0, T]?

    ``policy`` is a chooser run through the discretized simulator (tolerance
    1e-6 T by default) or the string "optimal" for the critical-threshold
    policy, which is checked exactly at its event times.
    """
    if np.any(inst.q0 != 0):
        raise RequiresZeroStart("weak stability is defined from the empty state")
    if isinstance(policy, str):
        if policy != "optimal":
            raise ValueError(f"unknown policy {policy!r}")
        from .optimal_control import compute_trajectory

        traj = compute_trajectory(inst, horizon=T)
        tol = EPS_ZERO if eps is None else eps
        for seg in traj.segments:
            end = min(seg.t_end, T)
            for t in (seg.t_start, end):
                if seg.state_at(t).sum() > tol:
                    return False
        return True
    run = simulate_discretized_policy(inst, policy, dt, T)
    tol = 1e-6 * T if eps is None else eps
    return bool(run.states.reshape(len(run.times), -1).sum(axis=1).max() <= tol)
