"""Switch instances, basic schedules, mixed schedules and admissibility.

Queues rho = (i, j) are 0-based internally and flattened row-major, so the
queue (i, j) of an n x n switch sits at flat index ``i * n + j``. Every
vector over the schedule set follows the ordering of ``ScheduleSet.schedules``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

EPS_FEAS = 1e-9
EPS_ZERO = 1e-9
MAX_N = 6


class DimensionTooLarge(ValueError):
    pass


class InvalidInstance(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Instance:
    """An n x n fluid switch: arrival rates, cost coefficients, initial fluid."""

    n: int
    lam: np.ndarray
    cost: np.ndarray
    q0: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.n
        for name in ("lam", "cost", "q0"):
            arr = np.array(getattr(self, name), dtype=float).reshape(n, n)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            if not np.all(np.isfinite(arr)):
                raise InvalidInstance(f"{name} has non-finite entries")
        if np.any(self.lam < 0) or np.any(self.lam > 1):
            raise InvalidInstance("arrival rates must lie in [0, 1]")
        if np.any(self.cost < 0):
            raise InvalidInstance("costs must be nonnegative")
        if np.any(self.q0 < 0):
            raise InvalidInstance("initial fluid must be nonnegative")

    def with_q0(self, q0) -> "Instance":
        return Instance(self.n, self.lam, self.cost, q0, dict(self.meta))

    @property
    def load(self) -> float:
        """Largest row or column sum of the arrival rates."""
        return float(max(self.lam.sum(axis=0).max(), self.lam.sum(axis=1).max()))

    # -- text format -------------------------------------------------------

    def to_dict(self) -> dict:
        doc = {
            "n": self.n,
            "lambda": self.lam.reshape(-1).tolist(),
            "cost": self.cost.reshape(-1).tolist(),
            "q0": self.q0.reshape(-1).tolist(),
        }
        doc.update(self.meta)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Instance":
        doc = dict(doc)
        try:
            n = int(doc.pop("n"))
            lam = doc.pop("lambda")
            cost = doc.pop("cost")
            q0 = doc.pop("q0")
        except KeyError as exc:
            raise InvalidInstance(f"missing field {exc}") from None
        for name, vals in (("lambda", lam), ("cost", cost), ("q0", q0)):
            if len(vals) != n * n:
                raise InvalidInstance(f"{name} must have n*n = {n * n} entries")
        return cls(n, np.array(lam), np.array(cost), np.array(q0), doc)

    def dumps(self) -> str:
        # json writes floats with repr(), which round-trips exactly
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "Instance":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    @classmethod
    def load_file(cls, path) -> "Instance":
        return cls.loads(Path(path).read_text())


@dataclass(frozen=True, eq=False)
class ScheduleSet:
    """All basic schedules (partial permutations) of an n x n switch.

    ``A[k, i*n + j] == 1`` iff schedule k serves queue (i, j).
    """

    n: int
    schedules: tuple
    A: np.ndarray
    index: dict

    def __len__(self):
        return len(self.schedules)

    @property
    def empty_index(self) -> int:
        return self.index[()]

    def weights(self, cost) -> np.ndarray:
        """w(s) for every schedule."""
        return self.A @ np.asarray(cost, dtype=float).reshape(-1)

    def lookup(self, served) -> int:
        return self.index[tuple(sorted(served))]


_SCHEDULE_CACHE: dict[int, ScheduleSet] = {}


def enumerate_basic_schedules(n: int) -> ScheduleSet:
    """Every partial permutation of [n] x [n], ordered by size then lexicographically."""
    if n < 1:
        raise ValueError("n must be positive")
    if n > MAX_N:
        raise DimensionTooLarge(f"n={n} exceeds enumeration limit {MAX_N}")
    if n in _SCHEDULE_CACHE:
        return _SCHEDULE_CACHE[n]
    scheds = []
    for k in range(n + 1):
        size_k = []
        for rows in itertools.combinations(range(n), k):
            for cols in itertools.permutations(range(n), k):
                size_k.append(tuple(zip(rows, cols)))
        scheds.extend(sorted(size_k))
    A = np.zeros((len(scheds), n * n))
    for k, s in enumerate(scheds):
        for i, j in s:
            A[k, i * n + j] = 1.0
    A.setflags(write=False)
    sset = ScheduleSet(n, tuple(scheds), A, {s: k for k, s in enumerate(scheds)})
    _SCHEDULE_CACHE[n] = sset
    return sset


def schedule_count(n: int) -> int:
    return sum(math.comb(n, k) ** 2 * math.factorial(k) for k in range(n + 1))


def schedule_weight(s, cost) -> float:
    cost = np.asarray(cost, dtype=float)
    return float(sum(cost[i, j] for i, j in s))


def service_rate(mu, sset: ScheduleSet) -> np.ndarray:
    """(mu A) reshaped to an n x n matrix."""
    return (np.asarray(mu, dtype=float) @ sset.A).reshape(sset.n, sset.n)


def point_mass(sset: ScheduleSet, k: int) -> np.ndarray:
    mu = np.zeros(len(sset))
    mu[k] = 1.0
    return mu


def complete_with_empty(mu, sset: ScheduleSet) -> np.ndarray:
    """Assign any missing mass to the empty schedule so the weights sum to one."""
    mu = np.array(mu, dtype=float)
    deficit = 1.0 - mu.sum()
    if deficit < -EPS_FEAS:
        raise ValueError(f"schedule mass {mu.sum()} exceeds one")
    mu[sset.empty_index] += max(deficit, 0.0)
    return mu


def zero_queues(q, eps_zero: float = EPS_ZERO) -> np.ndarray:
    """Boolean mask (flat) of queues treated as empty."""
    return np.asarray(q, dtype=float).reshape(-1) <= eps_zero


def is_admissible(
    mu,
    q,
    inst: Instance,
    sset: Optional[ScheduleSet] = None,
    eps_feas: float = EPS_FEAS,
    eps_zero: float = EPS_ZERO,
) -> bool:
    """Unit mass and no zero queue served faster than it fills."""
    sset = sset or enumerate_basic_schedules(inst.n)
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < -eps_feas) or abs(mu.sum() - 1.0) > eps_feas:
        return False
    rate = service_rate(mu, sset).reshape(-1)
    zq = zero_queues(q, eps_zero)
    return bool(np.all(rate[zq] <= inst.lam.reshape(-1)[zq] + eps_feas))
