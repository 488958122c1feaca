import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from switchfluid.baselines import (
    CmuPolicy,
    MaxWeightPolicy,
    RequiresZeroStart,
    WeightMode,
    cmu_schedule,
    max_weight_schedule,
    simulate_discretized_policy,
    weak_stability_probe,
)
from switchfluid.switch_model import Instance, enumerate_basic_schedules, is_admissible, service_rate

from conftest import ex1_instance


def _served(k, n):
    return set(enumerate_basic_schedules(n).schedules[k])


def test_zero_state_picks_empty_schedule():
    sset = enumerate_basic_schedules(3)
    assert max_weight_schedule(np.zeros((3, 3))) == sset.empty_index


def test_diagonal_dominant_picks_identity():
    q = np.ones((3, 3)) + 9 * np.eye(3)
    assert _served(max_weight_schedule(q), 3) == {(0, 0), (1, 1), (2, 2)}


def test_single_positive_entry():
    q = np.zeros((3, 3))
    q[0, 1] = 5.0
    assert _served(max_weight_schedule(q), 3) == {(0, 1)}


def test_cost_weighted_mode_needs_costs():
    with pytest.raises(ValueError):
        max_weight_schedule(np.ones((2, 2)), weight_mode="cq")


def test_cost_weighted_mode():
    q = np.array([[1.0, 2.0], [2.0, 1.0]])
    cost = np.array([[5.0, 1.0], [1.0, 5.0]])
    assert _served(max_weight_schedule(q, weight_mode=WeightMode.QUEUE), 2) == {(0, 1), (1, 0)}
    assert _served(max_weight_schedule(q, weight_mode="cq", cost=cost), 2) == {(0, 0), (1, 1)}


@settings(max_examples=200)
@given(st.integers(0, 2**31 - 1), st.integers(1, 3))
def test_max_weight_is_a_brute_force_maximizer(seed, n):
    rng = np.random.default_rng(seed)
    q = rng.uniform(0, 10, (n, n)) * (rng.uniform(0, 1, (n, n)) < 0.7)
    k = max_weight_schedule(q)
    best = max(sum(q[i, j] for i, j in s) for s in enumerate_basic_schedules(n).schedules)
    assert sum(q[i, j] for i, j in _served(k, n)) == pytest.approx(best)


@settings(max_examples=100)
@given(st.integers(0, 2**31 - 1))
def test_assignment_route_matches_brute_force_weight_n4(seed):
    rng = np.random.default_rng(seed)
    q = rng.uniform(0, 10, (4, 4)) * (rng.uniform(0, 1, (4, 4)) < 0.6)
    k = max_weight_schedule(q)
    best = 0.0
    for perm in itertools.permutations(range(4)):
        best = max(best, sum(q[i, perm[i]] for i in range(4)))
    got = _served(k, 4)
    assert sum(q[i, j] for i, j in got) == pytest.approx(best)
    assert all(q[i, j] > 0 for i, j in got)


def test_cmu_on_ex1():
    inst = ex1_instance()
    sset = enumerate_basic_schedules(3)
    mu = cmu_schedule(np.zeros((3, 3)), inst, sset)
    masses = {sset.schedules[k]: round(float(v), 12) for k, v in enumerate(mu) if v > 1e-12}
    assert mu.sum() == pytest.approx(1.0)
    assert any({(0, 1), (1, 2)} <= set(s) and m == 0.45 for s, m in masses.items())
    assert any((1, 0) in s and m == 0.45 for s, m in masses.items())
    assert any((0, 0) in s and m == 0.1 for s, m in masses.items())
    rate = service_rate(mu, sset)
    assert rate[0, 0] == pytest.approx(0.1)


def test_cmu_parallel_queues_serves_costliest():
    n = 3
    q = np.zeros((n, n))
    q[:, 0] = [1.0, 2.0, 3.0]
    cost = np.zeros((n, n))
    cost[:, 0] = [0.3, 0.8, 0.5]
    inst = Instance(n, np.zeros((n, n)), cost, q)
    sset = enumerate_basic_schedules(n)
    mu = cmu_schedule(q, inst, sset)
    assert mu[sset.lookup([(1, 0)])] == pytest.approx(1.0)


def test_cmu_idles_on_empty_system():
    inst = Instance(2, np.zeros((2, 2)), np.ones((2, 2)), np.zeros((2, 2)))
    sset = enumerate_basic_schedules(2)
    mu = cmu_schedule(inst.q0, inst, sset)
    assert mu[sset.empty_index] == pytest.approx(1.0)


@settings(max_examples=100)
@given(st.integers(0, 2**31 - 1), st.integers(1, 3))
def test_cmu_is_admissible(seed, n):
    rng = np.random.default_rng(seed)
    lam = rng.uniform(0, 1, (n, n))
    lam *= rng.uniform(0.1, 0.99) / max(lam.sum(0).max(), lam.sum(1).max())
    q = rng.uniform(0, 5, (n, n)) * (rng.uniform(0, 1, (n, n)) < 0.5)
    inst = Instance(n, lam, rng.uniform(0, 1, (n, n)), q)
    mu = cmu_schedule(q, inst)
    assert mu.min() >= 0
    assert is_admissible(mu, q, inst)


def test_all_zero_run():
    inst = Instance(2, np.zeros((2, 2)), np.ones((2, 2)), np.zeros((2, 2)))
    run = simulate_discretized_policy(inst, MaxWeightPolicy(inst), 0.1, 1.0)
    assert run.total_cost == 0.0
    assert not run.states.any()


def test_single_queue_discretized_triangle():
    inst = Instance(1, [[0.0]], [[1.0]], [[10.0]])
    run = simulate_discretized_policy(inst, lambda q: 1, 0.1, 10.0)
    assert len(run.times) == 101
    assert abs(run.total_cost - 50.0) <= 0.1 * 10.0
    # left sums overshoot the triangle by exactly dt * q0 / 2
    assert run.total_cost == pytest.approx(50.0 + 0.5, abs=1e-9)


def test_discretized_cost_converges():
    inst = Instance(2, [[0.2, 0.1], [0.1, 0.3]], [[1.0, 0.5], [0.2, 0.8]], [[3.0, 1.0], [2.0, 4.0]])
    costs = [simulate_discretized_policy(inst, MaxWeightPolicy(inst), dt, 20.0).total_cost
             for dt in (0.04, 0.02, 0.01)]
    assert abs(costs[2] - costs[1]) < abs(costs[1] - costs[0]) + 1e-9


def test_cmu_grows_ex1_queue():
    inst = ex1_instance()
    run = simulate_discretized_policy(inst, CmuPolicy(inst), 1e-3, 10.0)
    rate = (run.states[-1, 0, 0] - run.states[0, 0, 0]) / 10.0
    assert rate == pytest.approx(0.35, abs=0.01)
    assert run.total_cost > 0


def test_weak_stability():
    inst = ex1_instance()
    assert not weak_stability_probe(inst, CmuPolicy(inst))
    assert weak_stability_probe(inst, "optimal")
    quiet = Instance(2, np.zeros((2, 2)), np.ones((2, 2)), np.zeros((2, 2)))
    assert weak_stability_probe(quiet, MaxWeightPolicy(quiet), T=1.0, dt=0.01)


def test_weak_stability_requires_empty_start():
    with pytest.raises(RequiresZeroStart):
        weak_stability_probe(ex1_instance(np.ones((3, 3))), "optimal")


def test_run_csv(tmp_path):
    inst = Instance(1, [[0.0]], [[1.0]], [[1.0]])
    run = simulate_discretized_policy(inst, lambda q: 1, 0.5, 1.0)
    run.write_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0].startswith("t,q_1_1")
    assert len(lines) == 4
