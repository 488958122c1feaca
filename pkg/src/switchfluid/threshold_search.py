"""Critical thresholds of a fluid state.

For a state q and a threshold tau the flow problem is

    max  sum_{s in I_tau} (w(s) - tau) nu(s)
    s.t. sum_{s ∋ rho} nu(s) <= lam(rho)   for every empty queue rho
         nu >= 0

over the schedules I_tau = {s : w(s) >= tau}. tau is *critical* when some
optimal nu has unit mass; that nu (zero-extended) is then an admissible
mixed schedule at q. The search first bisects over the distinct schedule
weights and, failing that, runs a secant-like iteration on a fixed
schedule support inside the bracketing weight interval.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .lp_core import (
    DEFAULT_TOL,
    FaceRange,
    LinearProgram,
    Status,
    Tolerances,
    optimal_face_extremes,
    solve_max_lp,
)
from .switch_model import EPS_ZERO, Instance, ScheduleSet, enumerate_basic_schedules

log = logging.getLogger(__name__)

EPS_NORM = 1e-7
# distinct-weight resolution; weights are sums of at most n costs
EPS_WEIGHT = 1e-12


class ThresholdError(RuntimeError):
    pass


class BracketInvalid(ThresholdError):
    pass


class InternalError(ThresholdError):
    pass


@dataclass(frozen=True, eq=False)
class ThresholdContext:
    inst: Instance
    sset: ScheduleSet
    q: np.ndarray  # flat, entries <= eps_zero snapped to 0
    tol: Tolerances = DEFAULT_TOL

    @cached_property
    def weights(self) -> np.ndarray:
        return self.sset.weights(self.inst.cost)

    @cached_property
    def W(self) -> np.ndarray:
        """Distinct schedule weights, strictly decreasing; always ends at 0."""
        vals = np.sort(self.weights)[::-1]
        out = [vals[0]]
        for v in vals[1:]:
            if out[-1] - v > EPS_WEIGHT * (1.0 + abs(v)):
                out.append(v)
        return np.array(out)

    @cached_property
    def zero_mask(self) -> np.ndarray:
        return self.q == 0.0

    @cached_property
    def lam(self) -> np.ndarray:
        return self.inst.lam.reshape(-1)

    @cached_property
    def avoids_zero(self) -> np.ndarray:
        """Schedules that serve no empty queue."""
        return self.sset.A[:, self.zero_mask].sum(axis=1) == 0

    def support(self, tau: float) -> np.ndarray:
        """Indices of I_tau."""
        return np.nonzero(self.weights >= tau - EPS_WEIGHT * (1.0 + abs(tau)))[0]

    @cached_property
    def h(self) -> int:
        """Smallest index k such that some schedule of weight W[k] avoids empty queues."""
        for k, tau in enumerate(self.W):
            hit = np.abs(self.weights - tau) <= EPS_WEIGHT * (1.0 + abs(tau))
            if np.any(hit & self.avoids_zero):
                return k
        # the empty schedule has weight 0 == W[-1] and avoids everything
        raise InternalError("no schedule avoids the empty queues; schedule set is broken")


def make_context(inst: Instance, q=None, sset: Optional[ScheduleSet] = None,
                 eps_zero: float = EPS_ZERO, tol: Tolerances = DEFAULT_TOL) -> ThresholdContext:
    q = inst.q0 if q is None else q
    q = np.array(q, dtype=float).reshape(-1)
    q[q <= eps_zero] = 0.0
    q.setflags(write=False)
    return ThresholdContext(inst, sset or enumerate_basic_schedules(inst.n), q, tol)


def flow_problem(ctx: ThresholdContext, support: np.ndarray, tau: float) -> LinearProgram:
    """The flow LP over ``support`` with objective w(s) - tau."""
    obj = ctx.weights[support] - tau
    obj[np.abs(obj) <= EPS_WEIGHT * (1.0 + abs(tau))] = 0.0
    rows = []
    A = ctx.sset.A
    for rho in np.nonzero(ctx.zero_mask)[0]:
        coeffs = A[support, rho]
        if coeffs.any():
            rows.append((coeffs, ctx.lam[rho]))
    return LinearProgram(len(support), obj, rows)


@dataclass(frozen=True, eq=False)
class FlowSolution:
    tau: float
    support: np.ndarray
    gamma: float
    vertex: np.ndarray
    face: FaceRange

    @property
    def kind(self) -> str:
        """'hit' if a unit-mass optimum exists, else 'below' / 'above'."""
        if self.face.min_norm > 1.0 + EPS_NORM:
            return "above"
        if self.face.max_norm < 1.0 - EPS_NORM:
            return "below"
        return "hit"


def _solve_flow(ctx: ThresholdContext, support: np.ndarray, tau: float) -> FlowSolution:
    lp = flow_problem(ctx, support, tau)
    out = solve_max_lp(lp, ctx.tol)
    if out.status is not Status.OPTIMAL:
        raise InternalError(f"flow problem at tau={tau!r} is {out.status.value}")
    face = optimal_face_extremes(lp, out.value, ctx.tol)
    return FlowSolution(tau, support, out.value, out.solution, face)


def solve_P(ctx: ThresholdContext, tau: float) -> tuple[float, np.ndarray]:
    """Optimal value and a basic optimal solution (indexed by ``ctx.support(tau)``)."""
    sol = _solve_flow(ctx, ctx.support(tau), tau)
    return sol.gamma, sol.vertex


def _ray_schedule(ctx: ThresholdContext, support: np.ndarray, tau: float) -> Optional[int]:
    """Position in ``support`` of a schedule along which the optimal face is unbounded.

    Among candidates the largest schedule wins (first in the ordering on ties),
    so zero-cost busy queues still get served.
    """
    flat = np.abs(ctx.weights[support] - tau) <= EPS_WEIGHT * (1.0 + abs(tau))
    cand = np.nonzero(flat & ctx.avoids_zero[support])[0]
    if not cand.size:
        return None
    sizes = ctx.sset.A[support[cand]].sum(axis=1)
    return int(cand[int(np.argmax(sizes))])


def _witness(ctx: ThresholdContext, sol: FlowSolution) -> Optional[np.ndarray]:
    """Unit-mass point of the optimal face, zero-extended to all schedules."""
    if sol.kind != "hit":
        return None
    face = sol.face
    lo = face.min_norm
    if face.max_point is None:
        ray = _ray_schedule(ctx, sol.support, sol.tau)
        if ray is None:
            raise InternalError("unbounded optimal face without a recession schedule")
        nu = face.min_point.copy()
        nu[ray] += max(1.0 - lo, 0.0)
    else:
        hi = face.max_norm
        if hi - lo <= 1e-15:
            nu = face.min_point.copy()
        else:
            alpha = min(max((1.0 - lo) / (hi - lo), 0.0), 1.0)
            nu = (1.0 - alpha) * face.min_point + alpha * face.max_point
    nu = nu / nu.sum()
    mu = np.zeros(len(ctx.sset))
    mu[sol.support] = nu
    return mu


def q_witness(ctx: ThresholdContext, tau: float, gamma: Optional[float] = None,
              support: Optional[np.ndarray] = None) -> Optional[np.ndarray]:
    """A unit-mass optimal schedule at ``tau`` or None when tau is not critical.

    ``gamma`` is accepted for symmetry with the set-membership formulation; it
    is recomputed when omitted and checked when given.
    """
    support = ctx.support(tau) if support is None else support
    sol = _solve_flow(ctx, support, tau)
    if gamma is not None and abs(gamma - sol.gamma) > ctx.tol.opt * (1.0 + abs(gamma)):
        raise InternalError(f"gamma {gamma!r} is not the optimal value {sol.gamma!r}")
    return _witness(ctx, sol)


@dataclass(frozen=True, eq=False)
class CriticalThreshold:
    tau: float
    witness: np.ndarray  # over all schedules, unit mass
    gamma: float
    support: np.ndarray  # I_tau

    @property
    def nu(self) -> np.ndarray:
        return self.witness[self.support]


@dataclass(frozen=True)
class SearchOutcome:
    found: bool
    index: int  # 0-based into ctx.W; bracket is (W[index+1], W[index]) when not found


def _critical_at(ctx: ThresholdContext, sol: FlowSolution) -> CriticalThreshold:
    return CriticalThreshold(float(sol.tau), _witness(ctx, sol), sol.gamma, sol.support)


def search_in_W(ctx: ThresholdContext, _cache: Optional[dict] = None) -> SearchOutcome:
    """Bisection over the distinct weights for a critical threshold."""
    cache = {} if _cache is None else _cache

    def at(k):
        if k not in cache:
            cache[k] = _solve_flow(ctx, ctx.support(ctx.W[k]), ctx.W[k])
        return cache[k]

    lo, hi = 0, ctx.h
    if at(lo).kind == "hit":
        return SearchOutcome(True, lo)
    if at(hi).kind == "hit":
        return SearchOutcome(True, hi)
    while lo < hi - 1:
        mid = (lo + hi) // 2
        kind = at(mid).kind
        if kind == "hit":
            return SearchOutcome(True, mid)
        if kind == "above":
            hi = mid
        else:
            lo = mid
    return SearchOutcome(False, lo)


def secant_step(wbar, nu_small_tau, nu_large_tau) -> float:
    """Threshold at which the two vertices have equal objective value."""
    nu_s = np.asarray(nu_small_tau, dtype=float)
    nu_l = np.asarray(nu_large_tau, dtype=float)
    return float(np.dot(wbar, nu_s - nu_l) / (nu_s.sum() - nu_l.sum()))


def search_in_interval(ctx: ThresholdContext, l: int, max_iter: int = 1000) -> CriticalThreshold:
    """Critical threshold strictly between W[l+1] and W[l].

    Requires every optimum at W[l] to have mass < 1 and every optimum at
    W[l+1] (on the support I_{W[l]}) to have mass > 1.
    """
    if not 0 <= l < len(ctx.W) - 1:
        raise BracketInvalid(f"bracket index {l} out of range")
    support = ctx.support(ctx.W[l])
    wbar = ctx.weights[support]
    tau_L, tau_S = float(ctx.W[l]), float(ctx.W[l + 1])
    sol_L = _solve_flow(ctx, support, tau_L)
    sol_S = _solve_flow(ctx, support, tau_S)
    if sol_L.kind != "below" or sol_S.kind != "above":
        raise BracketInvalid(
            f"norm ranges [{sol_L.face.min_norm}, {sol_L.face.max_norm}] at {tau_L} and "
            f"[{sol_S.face.min_norm}, {sol_S.face.max_norm}] at {tau_S} do not bracket 1"
        )
    nu_L, nu_S = sol_L.vertex, sol_S.vertex
    for _ in range(max_iter):
        tau_M = secant_step(wbar, nu_S, nu_L)
        for end in (tau_S, tau_L):
            if abs(tau_M - end) <= EPS_NORM:
                w = q_witness(ctx, end)
                if w is not None:
                    return CriticalThreshold(end, w, _solve_flow(ctx, ctx.support(end), end).gamma,
                                             ctx.support(end))
        tau_M = min(max(tau_M, tau_S), tau_L)
        sol_M = _solve_flow(ctx, support, tau_M)
        kind = sol_M.kind
        if kind == "hit":
            return _critical_at(ctx, sol_M)
        if kind == "above":
            tau_S, nu_S = tau_M, sol_M.vertex
        else:
            tau_L, nu_L = tau_M, sol_M.vertex
    raise InternalError(f"interval search did not terminate in {max_iter} iterations")


def critical_threshold(ctx: ThresholdContext) -> CriticalThreshold:
    cache: dict = {}
    outcome = search_in_W(ctx, cache)
    if outcome.found:
        return _critical_at(ctx, cache[outcome.index])
    log.debug("no critical threshold among weights; bracket index %d", outcome.index)
    return search_in_interval(ctx, outcome.index)
