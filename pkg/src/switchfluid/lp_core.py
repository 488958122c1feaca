"""Dense two-phase simplex returning vertex (basic) optimal solutions.

Problems are in max form::

    maximize    objective . x
    subject to  a . x <= b   for every (a, b) in ineq_rows
                a . x == b   for every (a, b) in eq_rows
                x >= 0

The solver is deliberately small and exact-pivoting: the threshold search
needs *basic* optimal solutions and a deterministic pivot sequence, which
interior-point codes do not give.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class LpError(Exception):
    pass


class MalformedProgram(LpError):
    pass


class NumericalBreakdown(LpError):
    pass


class InconsistentValue(LpError):
    pass


@dataclass(frozen=True)
class Tolerances:
    feas: float = 1e-9
    opt: float = 1e-8
    pivot: float = 1e-11
    # reduced-cost threshold for an entering column
    dual: float = 1e-10


DEFAULT_TOL = Tolerances()


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    num_vars: int
    objective: np.ndarray
    ineq_rows: list = field(default_factory=list)
    eq_rows: list = field(default_factory=list)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).reshape(-1)
        if self.objective.shape[0] != self.num_vars:
            raise MalformedProgram(
                f"objective has length {self.objective.shape[0]}, expected {self.num_vars}"
            )
        self.ineq_rows = [self._check_row(r) for r in self.ineq_rows]
        self.eq_rows = [self._check_row(r) for r in self.eq_rows]

    def _check_row(self, row):
        coeffs, rhs = row
        coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
        if coeffs.shape[0] != self.num_vars:
            raise MalformedProgram(
                f"row has length {coeffs.shape[0]}, expected {self.num_vars}"
            )
        rhs = float(rhs)
        if not (math.isfinite(rhs) and np.all(np.isfinite(coeffs))):
            raise MalformedProgram("non-finite row data")
        return coeffs, rhs

    @classmethod
    def from_arrays(cls, objective, A_ub=None, b_ub=None, A_eq=None, b_eq=None):
        objective = np.asarray(objective, dtype=float)
        nv = objective.shape[0]
        ineq = [] if A_ub is None else list(zip(np.asarray(A_ub, float).reshape(-1, nv), b_ub))
        eq = [] if A_eq is None else list(zip(np.asarray(A_eq, float).reshape(-1, nv), b_eq))
        return cls(nv, objective, ineq, eq)

    @property
    def num_rows(self) -> int:
        return len(self.ineq_rows) + len(self.eq_rows)


@dataclass(frozen=True)
class LpOutcome:
    status: Status
    value: Optional[float] = None
    solution: Optional[np.ndarray] = None
    basis: tuple = ()

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class _Tableau:
    """Row-reduced tableau. Row 0 .. m-1 are constraints, last row the objective.

    The objective row stores reduced costs ``c_j - c_B B^-1 a_j`` so an entering
    column is one with a positive entry (maximization).
    """

    def __init__(self, body: np.ndarray, basis: list, tol: Tolerances):
        self.T = body
        self.basis = basis
        self.tol = tol

    @property
    def m(self) -> int:
        return self.T.shape[0] - 1

    def set_objective(self, costs: np.ndarray):
        obj = np.zeros(self.T.shape[1])
        obj[: costs.shape[0]] = costs
        for i, b in enumerate(self.basis):
            if obj[b] != 0.0:
                obj -= obj[b] * self.T[i]
        self.T[-1] = obj

    def pivot(self, row: int, col: int):
        T = self.T
        piv = T[row, col]
        if abs(piv) < self.tol.pivot:
            raise NumericalBreakdown(f"pivot {piv:.3e} below tolerance")
        T[row] /= piv
        colvals = T[:, col].copy()
        colvals[row] = 0.0
        nz = np.nonzero(colvals)[0]
        if nz.size:
            T[nz] -= np.outer(colvals[nz], T[row])
        T[:, col] = 0.0
        T[row, col] = 1.0
        self.basis[row] = col

    def _ratio_row(self, col: int, bland: bool) -> Optional[int]:
        T = self.T
        column = T[:-1, col]
        rhs = T[:-1, -1]
        cand = np.nonzero(column > self.tol.pivot)[0]
        if cand.size == 0:
            return None
        ratios = np.maximum(rhs[cand], 0.0) / column[cand]
        best = ratios.min()
        ties = cand[ratios <= best + 1e-12 * max(1.0, abs(best))]
        if ties.size == 1:
            return int(ties[0])
        if bland:
            return int(min(ties, key=lambda r: self.basis[r]))
        # prefer the largest pivot element among ties for stability
        return int(ties[np.argmax(column[ties])])

    def run(self, allowed: np.ndarray, max_iter: int) -> Status:
        """Primal simplex on the current objective row over ``allowed`` columns."""
        degenerate_run = 0
        bland = False
        for _ in range(max_iter):
            red = np.where(allowed, self.T[-1, :-1], 0.0)
            positive = np.nonzero(red > self.tol.dual)[0]
            if positive.size == 0:
                return Status.OPTIMAL
            if bland:
                col = int(positive[0])
            else:
                col = int(positive[np.argmax(red[positive])])
            row = self._ratio_row(col, bland)
            if row is None:
                return Status.UNBOUNDED
            if self.T[row, -1] <= self.tol.feas:
                degenerate_run += 1
                if degenerate_run > 10:
                    bland = True
            else:
                degenerate_run = 0
            self.pivot(row, col)
        raise NumericalBreakdown(f"simplex did not terminate in {max_iter} pivots")


def solve_max_lp(lp: LinearProgram, tol: Tolerances = DEFAULT_TOL) -> LpOutcome:
    """Solve ``lp`` by two-phase simplex; the optimal solution is a vertex."""
    nv = lp.num_vars
    rows = [(a, b, "le") for a, b in lp.ineq_rows] + [(a, b, "eq") for a, b in lp.eq_rows]
    m = len(rows)
    if m == 0:
        if np.any(lp.objective > tol.dual):
            return LpOutcome(Status.UNBOUNDED)
        return LpOutcome(Status.OPTIMAL, 0.0, np.zeros(nv), ())

    n_slack = sum(1 for _, _, kind in rows if kind == "le")
    # artificial needed for eq rows and for <= rows with negative rhs
    needs_art = [kind == "eq" or b < 0 for _, b, kind in rows]
    n_art = sum(needs_art)
    ncol = nv + n_slack + n_art
    T = np.zeros((m + 1, ncol + 1))
    basis = [0] * m
    s_idx = nv
    a_idx = nv + n_slack
    for i, (a, b, kind) in enumerate(rows):
        sign = -1.0 if b < 0 else 1.0
        T[i, :nv] = sign * a
        T[i, -1] = sign * b
        if kind == "le":
            T[i, s_idx] = sign
            if sign > 0:
                basis[i] = s_idx
            s_idx += 1
        if needs_art[i]:
            T[i, a_idx] = 1.0
            basis[i] = a_idx
            a_idx += 1

    tab = _Tableau(T, basis, tol)
    max_iter = 50 * (ncol + m) + 1000
    art_start = nv + n_slack
    scale = 1.0 + max(abs(b) for _, b, _ in rows)

    if n_art:
        phase1 = np.zeros(ncol)
        phase1[art_start:] = -1.0
        tab.set_objective(phase1)
        tab.run(np.ones(ncol, dtype=bool), max_iter)
        art_sum = sum(tab.T[i, -1] for i, b in enumerate(tab.basis) if b >= art_start)
        if art_sum > tol.feas * scale:
            return LpOutcome(Status.INFEASIBLE)
        # drive artificials out of the basis; drop redundant rows
        keep = []
        for i in range(m):
            if tab.basis[i] >= art_start:
                row = tab.T[i, :art_start]
                cand = np.nonzero(np.abs(row) > 1e3 * tol.pivot)[0]
                if cand.size:
                    tab.pivot(i, int(cand[np.argmax(np.abs(row[cand]))]))
                    keep.append(i)
                # else: redundant row, dropped
            else:
                keep.append(i)
        body = np.vstack([tab.T[keep][:, list(range(art_start)) + [ncol]], np.zeros((1, art_start + 1))])
        tab = _Tableau(body, [tab.basis[i] for i in keep], tol)
        ncol = art_start

    tab.set_objective(lp.objective)
    status = tab.run(np.ones(ncol, dtype=bool), max_iter)
    if status is Status.UNBOUNDED:
        return LpOutcome(Status.UNBOUNDED)

    full = np.zeros(ncol)
    for i, b in enumerate(tab.basis):
        full[b] = max(tab.T[i, -1], 0.0)
    x = full[:nv]
    x[x < tol.feas * 1e-3] = 0.0
    value = float(lp.objective @ x)
    basis = tuple(sorted(b for b in tab.basis if b < nv))
    return LpOutcome(Status.OPTIMAL, value, x, basis)


@dataclass(frozen=True)
class FaceRange:
    """Extremes of ``sum(x)`` over the optimal face of an LP."""

    min_norm: float
    max_norm: float
    min_point: np.ndarray
    max_point: Optional[np.ndarray]  # None when the face is unbounded in norm


def optimal_face_extremes(
    lp: LinearProgram, opt_value: float, tol: Tolerances = DEFAULT_TOL
) -> FaceRange:
    nv = lp.num_vars
    face_eq = list(lp.eq_rows) + [(lp.objective, opt_value)]
    ones = np.ones(nv)
    lo = solve_max_lp(LinearProgram(nv, -ones, lp.ineq_rows, face_eq), tol)
    if lo.status is Status.INFEASIBLE:
        raise InconsistentValue(f"optimal face empty at value {opt_value!r}")
    if not lo.optimal:
        raise NumericalBreakdown(f"min-norm problem returned {lo.status}")
    hi = solve_max_lp(LinearProgram(nv, ones, lp.ineq_rows, face_eq), tol)
    if hi.status is Status.INFEASIBLE:
        raise InconsistentValue(f"optimal face empty at value {opt_value!r}")
    if hi.status is Status.UNBOUNDED:
        return FaceRange(float(lo.solution.sum()), math.inf, lo.solution, None)
    return FaceRange(float(lo.solution.sum()), float(hi.solution.sum()), lo.solution, hi.solution)


def optimal_face_norm_range(
    lp: LinearProgram, opt_value: float, tol: Tolerances = DEFAULT_TOL
) -> tuple[float, float]:
    """Return (min, max) of ``sum(x)`` over ``{x feasible : objective . x = opt_value}``."""
    face = optimal_face_extremes(lp, opt_value, tol)
    return face.min_norm, face.max_norm


def as_dual(lp: LinearProgram) -> LinearProgram:
    """Dual of an inequality-only max LP, written back in max form.

    max c.x, Ax <= b, x >= 0  has dual  min b.y, A^T y >= c, y >= 0, i.e.
    max -b.y, -A^T y <= -c.
    """
    if lp.eq_rows:
        raise MalformedProgram("as_dual handles inequality rows only")
    if not lp.ineq_rows:
        return LinearProgram(0, np.zeros(0), [(np.zeros(0), -c) for c in lp.objective])
    A = np.array([a for a, _ in lp.ineq_rows])
    b = np.array([r for _, r in lp.ineq_rows])
    rows = [(-A[:, j], -lp.objective[j]) for j in range(lp.num_vars)]
    return LinearProgram(A.shape[0], -b, rows)
