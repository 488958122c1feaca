import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from switchfluid.switch_model import (
    DimensionTooLarge,
    Instance,
    InvalidInstance,
    complete_with_empty,
    enumerate_basic_schedules,
    is_admissible,
    point_mass,
    schedule_count,
    schedule_weight,
    service_rate,
)

from conftest import ex1_instance
from oracles import brute_force_schedules


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_enumeration_matches_brute_force(n):
    sset = enumerate_basic_schedules(n)
    brute = {tuple(m.reshape(-1)) for m in brute_force_schedules(n)}
    ours = {tuple(row.astype(int)) for row in sset.A}
    assert ours == brute
    assert len(sset) == len(brute)


@pytest.mark.parametrize("n,count", [(1, 2), (2, 7), (3, 34), (4, 209), (5, 1546)])
def test_counts(n, count):
    assert schedule_count(n) == count
    if n <= 4:
        assert len(enumerate_basic_schedules(n)) == count


def test_n1_schedules():
    assert enumerate_basic_schedules(1).schedules == ((), ((0, 0),))


def test_ordering_and_index():
    sset = enumerate_basic_schedules(3)
    sizes = [len(s) for s in sset.schedules]
    assert sizes == sorted(sizes)
    assert sset.empty_index == 0
    for k, s in enumerate(sset.schedules):
        assert sset.lookup(reversed(s)) == k


def test_too_large():
    with pytest.raises(DimensionTooLarge):
        enumerate_basic_schedules(7)


def test_weights_ex1():
    c = ex1_instance().cost
    assert schedule_weight((), c) == 0.0
    assert schedule_weight(((0, 1), (1, 2)), c) == pytest.approx(2.0)
    assert schedule_weight(((0, 0), (1, 2)), c) == pytest.approx(1.1)
    sset = enumerate_basic_schedules(3)
    w = sset.weights(c)
    for k, s in enumerate(sset.schedules):
        assert w[k] == pytest.approx(schedule_weight(s, c))


def test_service_rate_examples():
    sset = enumerate_basic_schedules(3)
    assert not service_rate(point_mass(sset, sset.empty_index), sset).any()
    perm = ((0, 2), (1, 0), (2, 1))
    expected = np.zeros((3, 3))
    for i, j in perm:
        expected[i, j] = 1
    assert np.array_equal(service_rate(point_mass(sset, sset.lookup(perm)), sset), expected)


def _ex1_mu(sset):
    mu = np.zeros(len(sset))
    mu[sset.lookup([(0, 1), (1, 0)])] = 0.45
    mu[sset.lookup([(0, 0), (1, 2)])] = 0.45
    mu[sset.empty_index] = 0.10
    return mu


def test_ex1_rate_and_admissibility():
    inst = ex1_instance()
    sset = enumerate_basic_schedules(3)
    rate = service_rate(_ex1_mu(sset), sset)
    assert np.allclose(rate, inst.lam)
    assert is_admissible(_ex1_mu(sset), np.zeros((3, 3)), inst, sset)


mixes = st.lists(st.floats(0, 1), min_size=34, max_size=34).filter(lambda v: sum(v) > 1e-3)


@given(mixes, mixes, st.floats(0, 1))
def test_service_rate_linear_and_capped(a, b, t):
    sset = enumerate_basic_schedules(3)
    mu = np.array(a) / sum(a)
    nu = np.array(b) / sum(b)
    mix = t * mu + (1 - t) * nu
    assert np.allclose(service_rate(mix, sset), t * service_rate(mu, sset) + (1 - t) * service_rate(nu, sset))
    r = service_rate(mu, sset)
    assert r.min() >= 0
    assert r.sum(axis=0).max() <= 1 + 1e-12 and r.sum(axis=1).max() <= 1 + 1e-12


@given(mixes)
def test_positive_state_admits_every_mix(a):
    inst = Instance(3, np.full((3, 3), 0.1), np.ones((3, 3)), np.ones((3, 3)))
    mu = np.array(a) / sum(a)
    assert is_admissible(mu, inst.q0, inst)


def test_serving_empty_queue_with_no_arrivals_is_inadmissible():
    inst = Instance(2, np.zeros((2, 2)), np.ones((2, 2)), np.zeros((2, 2)))
    sset = enumerate_basic_schedules(2)
    assert not is_admissible(point_mass(sset, sset.lookup([(0, 0)])), inst.q0, inst, sset)
    assert is_admissible(point_mass(sset, sset.empty_index), inst.q0, inst, sset)


def test_mass_must_be_one():
    inst = ex1_instance()
    sset = enumerate_basic_schedules(3)
    assert not is_admissible(0.5 * _ex1_mu(sset), np.ones((3, 3)), inst, sset)


def test_complete_with_empty():
    sset = enumerate_basic_schedules(2)
    mu = np.zeros(len(sset))
    mu[3] = 0.4
    done = complete_with_empty(mu, sset)
    assert done.sum() == pytest.approx(1.0)
    assert done[sset.empty_index] == pytest.approx(0.6)
    with pytest.raises(ValueError):
        complete_with_empty(2 * np.ones(len(sset)), sset)


@pytest.mark.parametrize("field,value", [("lam", -0.1), ("lam", 1.5), ("cost", -1.0), ("q0", -2.0),
                                          ("q0", math.nan)])
def test_instance_validation(field, value):
    arrays = {"lam": np.zeros((2, 2)), "cost": np.ones((2, 2)), "q0": np.zeros((2, 2))}
    arrays[field][0, 1] = value
    with pytest.raises(InvalidInstance):
        Instance(2, arrays["lam"], arrays["cost"], arrays["q0"])


def test_instance_arrays_read_only():
    inst = ex1_instance()
    with pytest.raises(ValueError):
        inst.lam[0, 0] = 1.0


@given(st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    inst = Instance(n, rng.uniform(0, 1, (n, n)) / n, rng.uniform(0, 1, (n, n)),
                    rng.uniform(0, 100, (n, n)), {"seed": seed, "note": "x"})
    back = Instance.loads(inst.dumps())
    assert back.n == n
    assert np.array_equal(back.lam, inst.lam)
    assert np.array_equal(back.cost, inst.cost)
    assert np.array_equal(back.q0, inst.q0)
    assert back.meta == inst.meta


def test_load_missing_field():
    with pytest.raises(InvalidInstance):
        Instance.loads('{"n": 1, "lambda": [0.1], "cost": [1.0]}')
    with pytest.raises(InvalidInstance):
        Instance.loads('{"n": 2, "lambda": [0.1], "cost": [1.0], "q0": [0]}')


def test_save_load_file(tmp_path):
    inst = ex1_instance()
    inst.save(tmp_path / "i.json")
    back = Instance.load_file(tmp_path / "i.json")
    assert np.array_equal(back.lam, inst.lam)


def test_load_metric():
    assert ex1_instance().load == pytest.approx(0.9)
