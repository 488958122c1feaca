"""Piecewise-constant optimal control, its dual certificate, and fluid cost.

The policy recomputes a critical-threshold schedule each time a busy queue
empties and holds it constant in between, so the fluid state is piecewise
linear and everything here (costs, certificate checks) is closed form.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lp_core import LinearProgram, Status, solve_max_lp
from .switch_model import (
    EPS_FEAS,
    EPS_ZERO,
    Instance,
    ScheduleSet,
    enumerate_basic_schedules,
    is_admissible,
)
from .threshold_search import InternalError, ThresholdContext, critical_threshold, make_context

log = logging.getLogger(__name__)

# drift magnitudes below this are treated as exactly zero
EPS_DRIFT = 1e-12


class NotDrained(RuntimeError):
    pass


class TrajectoryStatus(enum.Enum):
    DRAINED = "drained"
    NON_DRAINED = "non_drained"  # horizon reached with fluid left
    SEGMENT_CAP = "segment_cap"


@dataclass(frozen=True, eq=False)
class TrajectorySegment:
    t_start: float
    t_end: float  # may be math.inf
    mu: np.ndarray  # over all schedules
    q_start: np.ndarray  # flat
    drift: np.ndarray  # flat, lam - mu A
    tau: float
    gamma: float
    zero_mask: np.ndarray  # empty queues at t_start (flat)
    zeta: np.ndarray  # dual solution over the empty queues, in flat order

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def eta(self) -> np.ndarray:
        """Dual multipliers zero-extended to every queue (flat)."""
        eta = np.zeros_like(self.q_start)
        eta[self.zero_mask] = self.zeta
        return eta

    def state_at(self, t: float) -> np.ndarray:
        q = self.q_start + (t - self.t_start) * self.drift
        return np.maximum(q, 0.0)

    @property
    def q_end(self) -> np.ndarray:
        if math.isinf(self.t_end):
            return self.q_start.copy()
        return self.state_at(self.t_end)


@dataclass(eq=False)
class PolicyTrajectory:
    inst: Instance
    segments: list
    status: TrajectoryStatus
    drain_time: Optional[float] = None
    horizon: float = math.inf

    @property
    def drained(self) -> bool:
        return self.status is TrajectoryStatus.DRAINED

    @property
    def event_times(self) -> list:
        return [seg.t_start for seg in self.segments]

    @property
    def end_time(self) -> float:
        return self.segments[-1].t_end

    def segment_index(self, t: float) -> int:
        starts = self.__dict__.get("_starts")
        if starts is None or len(starts) != len(self.segments):
            starts = np.array([seg.t_start for seg in self.segments])
            self.__dict__["_starts"] = starts
        k = int(np.searchsorted(starts, t, side="right")) - 1
        return max(k, 0)

    def state_at(self, t: float) -> np.ndarray:
        """Fluid level (n x n) at time t; the last known state is held past the end."""
        seg = self.segments[self.segment_index(t)]
        t = min(t, seg.t_end)
        return seg.state_at(t).reshape(self.inst.n, self.inst.n)

    def control_at(self, t: float) -> np.ndarray:
        return self.segments[self.segment_index(t)].mu

    def write_csv(self, path, num_samples: int = 200, t_max: Optional[float] = None) -> None:
        write_trajectory_csv(self, path, num_samples, t_max)


def next_event_time(q, mu, inst: Instance, sset: Optional[ScheduleSet] = None) -> float:
    """Time until the first busy queue drains under ``mu``; inf if none drains."""
    sset = sset or enumerate_basic_schedules(inst.n)
    q = np.asarray(q, dtype=float).reshape(-1)
    net = np.asarray(mu, dtype=float) @ sset.A - inst.lam.reshape(-1)
    busy = (q > EPS_ZERO) & (net > EPS_DRIFT)
    if not busy.any():
        return math.inf
    return float(np.min(q[busy] / net[busy]))


def solve_dual_D(ctx: ThresholdContext, tau: float) -> np.ndarray:
    """Optimal zeta >= 0 of  min lam_q . zeta  s.t.  A_{tau,q} zeta >= w_tau."""
    support = ctx.support(tau)
    zmask = ctx.zero_mask
    nz = int(zmask.sum())
    wt = ctx.weights[support] - tau
    sub = ctx.sset.A[np.ix_(support, np.nonzero(zmask)[0])]
    rows = []
    for k in range(len(support)):
        if sub[k].any():
            rows.append((-sub[k], -wt[k]))
        elif wt[k] > 1e-9:
            raise InternalError(
                f"dual infeasible at tau={tau!r}: a schedule of positive reduced weight "
                "serves no empty queue"
            )
    if nz == 0:
        return np.zeros(0)
    out = solve_max_lp(LinearProgram(nz, -ctx.lam[zmask], rows), ctx.tol)
    if out.status is not Status.OPTIMAL:
        raise InternalError(f"dual problem is {out.status.value} at tau={tau!r}")
    return out.solution


def compute_trajectory(
    inst: Instance,
    horizon: Optional[float] = None,
    max_segments: Optional[int] = None,
    sset: Optional[ScheduleSet] = None,
) -> PolicyTrajectory:
    """Run the critical-threshold policy from ``inst.q0``.

    Stops when the system is empty and stays empty (final segment extended to
    infinity), at ``horizon``, or after ``max_segments`` segments (default 10 n^2,
    raised to at least 50).
    """
    sset = sset or enumerate_basic_schedules(inst.n)
    if horizon is None:
        horizon = default_horizon(inst)
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    cap = max_segments or max(10 * inst.n**2, 50)
    lam = inst.lam.reshape(-1)
    q = inst.q0.reshape(-1).copy()
    q[q <= EPS_ZERO] = 0.0
    t = 0.0
    segments = []
    while True:
        ctx = make_context(inst, q, sset)
        ct = critical_threshold(ctx)
        zeta = solve_dual_D(ctx, ct.tau)
        mu = ct.witness
        drift = lam - mu @ sset.A
        drift[np.abs(drift) <= EPS_DRIFT] = 0.0
        dt = next_event_time(ctx.q, mu, inst, sset)
        seg = dict(mu=mu, q_start=ctx.q.copy(), drift=drift, tau=ct.tau, gamma=ct.gamma,
                   zero_mask=ctx.zero_mask.copy(), zeta=zeta)
        if math.isinf(dt):
            if not q.any() and np.all(drift <= 0.0):
                segments.append(TrajectorySegment(t, math.inf, **seg))
                return PolicyTrajectory(inst, segments, TrajectoryStatus.DRAINED, t, horizon)
            segments.append(TrajectorySegment(t, max(horizon, t), **seg))
            return PolicyTrajectory(inst, segments, TrajectoryStatus.NON_DRAINED, None, horizon)
        if t + dt > horizon:
            segments.append(TrajectorySegment(t, horizon, **seg))
            return PolicyTrajectory(inst, segments, TrajectoryStatus.NON_DRAINED, None, horizon)
        segments.append(TrajectorySegment(t, t + dt, **seg))
        q_next = ctx.q + dt * drift
        # the queue(s) attaining the minimum drain exactly
        net = -drift
        busy = (ctx.q > 0) & (net > 0)
        ratio = np.full_like(q, math.inf)
        ratio[busy] = ctx.q[busy] / net[busy]
        q_next[ratio <= dt * (1 + 1e-12)] = 0.0
        q_next[q_next <= EPS_ZERO] = 0.0
        q, t = q_next, t + dt
        if len(segments) >= cap:
            log.warning("segment cap %d reached at t=%g", cap, t)
            return PolicyTrajectory(inst, segments, TrajectoryStatus.SEGMENT_CAP, None, horizon)


def default_horizon(inst: Instance) -> float:
    """2 |q0|_1 / (1 - load), a generous cap on the drain time."""
    load = inst.load
    total = float(inst.q0.sum())
    if load >= 1.0:
        return max(100.0, 100.0 * total)
    return max(2.0 * total / (1.0 - load), 10.0)


# -- cost ---------------------------------------------------------------------


def _segment_integral(a: float, b: float, length: float, t0: float, beta: float) -> float:
    """Integral over [t0, t0+length] of exp(-beta t) (a + b (t - t0))."""
    if length <= 0:
        return 0.0
    if math.isinf(length):
        if a == 0.0 and b == 0.0:
            return 0.0
        if beta <= 0:
            return math.inf
        return math.exp(-beta * t0) * (a / beta + b / beta**2)
    if beta == 0:
        return (a + 0.5 * b * length) * length
    e = math.exp(-beta * length)
    x = beta * length
    # (1 - e^{-x}) and 1 - e^{-x}(1 + x) lose precision for small x
    one_minus = -math.expm1(-x)
    second = one_minus - x * e
    return math.exp(-beta * t0) * (a * one_minus / beta + b * second / beta**2)


def trajectory_cost(traj: PolicyTrajectory, cost=None, beta: float = 0.0,
                    until: Optional[float] = None) -> float:
    """Integral of exp(-beta t) c . q_t over [0, until] (default: whole horizon).

    Returns inf (with a warning) when the requested range reaches past the part
    of a non-drained trajectory that was computed.
    """
    cost = traj.inst.cost if cost is None else np.asarray(cost, dtype=float)
    c = cost.reshape(-1)
    end = math.inf if until is None else until
    if end > traj.end_time and not traj.drained:
        log.warning("cost requested beyond a non-drained trajectory; returning inf")
        return math.inf
    total = 0.0
    for seg in traj.segments:
        if seg.t_start >= end:
            break
        length = min(seg.t_end, end) - seg.t_start
        total += _segment_integral(float(c @ seg.q_start), float(c @ seg.drift), length,
                                   seg.t_start, beta)
    return total


def trapezoid_cost(traj: PolicyTrajectory, cost=None) -> float:
    """Undiscounted cost as the sum of per-segment trapezoids over finite segments."""
    cost = traj.inst.cost if cost is None else np.asarray(cost, dtype=float)
    c = cost.reshape(-1)
    total = 0.0
    for seg in traj.segments:
        if math.isinf(seg.t_end):
            if np.any(seg.q_start * c) or np.any(seg.drift * c):
                return math.inf
            continue
        total += float(c @ (seg.q_start + seg.q_end)) / 2.0 * seg.duration
    return total


# -- certificate ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SegmentCertificate:
    t_start: float
    t_end: float
    eta: np.ndarray  # flat
    slope: np.ndarray  # c - eta, flat

    def weight(self, t: float, beta: float) -> float:
        """g(t) with p_t = g(t) (c - eta); g solves g' - beta g = -1, g(t_end) = 0."""
        if math.isinf(self.t_end):
            return 0.0
        r = self.t_end - t
        if beta == 0:
            return r
        return -math.expm1(-beta * r) / beta

    def weight_dot(self, t: float, beta: float) -> float:
        if math.isinf(self.t_end):
            return 0.0
        return -math.exp(-beta * (self.t_end - t))

    def p(self, t: float, beta: float) -> np.ndarray:
        if math.isinf(self.t_end):
            return np.zeros_like(self.slope)
        return self.weight(t, beta) * self.slope

    def p_dot(self, t: float, beta: float) -> np.ndarray:
        if math.isinf(self.t_end):
            return np.zeros_like(self.slope)
        return self.weight_dot(t, beta) * self.slope


@dataclass(frozen=True, eq=False)
class Certificate:
    beta: float
    segments: list

    def p(self, k: int, t: float) -> np.ndarray:
        return self.segments[k].p(t, self.beta)


def build_certificate(traj: PolicyTrajectory, beta: float = 0.0) -> Certificate:
    """Per-segment multipliers eta and costates p_t = int_t^{t_{k+1}} e^{-beta(t'-t)} (c - eta) dt'."""
    if not traj.drained:
        raise NotDrained(f"trajectory status is {traj.status.value}")
    c = traj.inst.cost.reshape(-1)
    segs = []
    for seg in traj.segments:
        eta = seg.eta
        segs.append(SegmentCertificate(seg.t_start, seg.t_end, eta, c - eta))
    return Certificate(beta, segs)


@dataclass(frozen=True)
class CheckEntry:
    condition: str
    segment: int
    t: float
    residual: float
    passed: bool


@dataclass
class VerificationReport:
    tol: float
    entries: list = field(default_factory=list)
    boundary_jumps: list = field(default_factory=list)  # (segment boundary time, |jump in p|)

    def add(self, condition, segment, t, residual, passed):
        self.entries.append(CheckEntry(condition, segment, float(t), float(residual), bool(passed)))

    def condition_passed(self, condition: str) -> bool:
        return all(e.passed for e in self.entries if e.condition == condition)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def summary(self) -> dict:
        conds = sorted({e.condition for e in self.entries})
        return {c: self.condition_passed(c) for c in conds}

    def failures(self) -> list:
        return [e for e in self.entries if not e.passed]


def _sample_times(seg: TrajectorySegment) -> list:
    if math.isinf(seg.t_end):
        return [seg.t_start, seg.t_start + 1.0]
    return [seg.t_start, 0.5 * (seg.t_start + seg.t_end), seg.t_end]


def verify_certificate(traj: PolicyTrajectory, cert: Certificate, inst: Optional[Instance] = None,
                       beta: Optional[float] = None, tol: float = 1e-6,
                       sset: Optional[ScheduleSet] = None) -> VerificationReport:
    """Check the four sufficient optimality conditions on every segment.

    C1  mu* maximizes mu A p_t over the simplex; checked through its algebraic
        form max_s (A(c - eta))(s) <= tau_k with equality on the support of mu*,
        and directly at sample times.
    C2  p' - beta p = -(c - eta) on each segment (closed form).
    C3  q* . eta = 0 with q*, eta >= 0, at segment ends and midpoints.
    C4  p vanishes on the final (empty, invariant) segment.
    """
    inst = inst or traj.inst
    beta = cert.beta if beta is None else beta
    sset = sset or enumerate_basic_schedules(inst.n)
    A = sset.A
    report = VerificationReport(tol)
    for k, (seg, sc) in enumerate(zip(traj.segments, cert.segments)):
        vals = A @ sc.slope
        report.add("C1", k, seg.t_start, vals.max() - seg.tau, vals.max() <= seg.tau + tol)
        on = seg.mu > 1e-12
        dev = float(np.max(np.abs(vals[on] - seg.tau))) if on.any() else 0.0
        report.add("C1", k, seg.t_start, dev, dev <= tol)
        for t in _sample_times(seg):
            Ap = A @ sc.p(t, beta)
            gap = float(Ap.max() - seg.mu @ Ap)
            scale = 1.0 + float(np.abs(Ap).max())
            report.add("C1", k, t, gap, gap <= tol * scale)

            resid = sc.p_dot(t, beta) - beta * sc.p(t, beta) + sc.slope
            if math.isinf(seg.t_end):
                resid = sc.slope  # p is identically zero, so c - eta itself must vanish
            r = float(np.abs(resid).max())
            report.add("C2", k, t, r, r <= tol)

            q = seg.state_at(t) if not math.isinf(t) else seg.q_start
            raw = seg.q_start + (t - seg.t_start) * seg.drift
            slack = abs(float(q @ sc.eta))
            ok = slack <= tol and sc.eta.min() >= -tol and raw.min() >= -tol
            report.add("C3", k, t, max(slack, -sc.eta.min(), -raw.min()), ok)

        if k + 1 < len(cert.segments) and not math.isinf(seg.t_end):
            jump = float(np.abs(sc.p(seg.t_end, beta) - cert.segments[k + 1].p(seg.t_end, beta)).max())
            report.boundary_jumps.append((seg.t_end, jump))

    last_seg, last = traj.segments[-1], cert.segments[-1]
    p_last = max(float(np.abs(last.slope).max()), float(np.abs(last_seg.q_start).max()))
    ok = math.isinf(last.t_end) and p_last <= tol
    report.add("C4", len(traj.segments) - 1, last.t_start, p_last, ok)
    return report


def complementary_slackness(traj: PolicyTrajectory, sset: Optional[ScheduleSet] = None) -> list:
    """Per segment: (|lam_q . zeta - gamma|, max_rho |zeta (lam - (nu A))|)."""
    sset = sset or enumerate_basic_schedules(traj.inst.n)
    lam = traj.inst.lam.reshape(-1)
    out = []
    for seg in traj.segments:
        zm = seg.zero_mask
        duality_gap = abs(float(lam[zm] @ seg.zeta) - seg.gamma)
        served = (seg.mu @ sset.A)[zm]
        slack = float(np.max(np.abs(seg.zeta * (lam[zm] - served)))) if zm.any() else 0.0
        out.append((duality_gap, slack))
    return out


def trajectory_admissible(traj: PolicyTrajectory, samples: int = 1000,
                          sset: Optional[ScheduleSet] = None) -> bool:
    """Controls admissible and state nonnegative at ``samples`` times per trajectory."""
    sset = sset or enumerate_basic_schedules(traj.inst.n)
    t_end = traj.end_time if not math.isinf(traj.end_time) else traj.segments[-1].t_start + 1.0
    for t in np.linspace(0.0, t_end, samples):
        seg = traj.segments[traj.segment_index(t)]
        raw = seg.q_start + (min(t, seg.t_end) - seg.t_start) * seg.drift
        if raw.min() < -EPS_FEAS * (1.0 + np.abs(seg.q_start).max()):
            return False
        if t < seg.t_end and not is_admissible(seg.mu, np.maximum(raw, 0.0), traj.inst, sset):
            return False
    return True


# -- export ---------------------------------------------------------------------


def queue_columns(n: int) -> list:
    return [f"q_{i + 1}_{j + 1}" for i in range(n) for j in range(n)]


def write_trajectory_csv(traj: PolicyTrajectory, path, num_samples: int = 200,
                         t_max: Optional[float] = None) -> None:
    """Columns: t, q_1_1 ... q_n_n (row-major), segment, tau."""
    n = traj.inst.n
    last = traj.segments[-1]
    if t_max is None:
        t_max = last.t_start if math.isinf(last.t_end) else last.t_end
        if t_max == 0.0:
            t_max = 1.0
    times = set(t for t in traj.event_times if t <= t_max)
    if not math.isinf(last.t_end) and last.t_end <= t_max:
        times.add(last.t_end)
    times.update(np.linspace(0.0, t_max, num_samples).tolist())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *queue_columns(n), "segment", "tau"])
        for t in sorted(times):
            k = traj.segment_index(t)
            q = traj.state_at(t).reshape(-1)
            w.writerow([repr(float(t)), *(repr(float(x)) for x in q), k, repr(traj.segments[k].tau)])
