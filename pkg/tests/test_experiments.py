import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from switchfluid.experiments import (
    InvalidKappa,
    batch_histogram,
    generate_instance,
    instance_seeds,
    run_comparison,
    write_reports_csv,
)
from switchfluid.switch_model import Instance

from conftest import ex1_instance


@given(st.integers(0, 2**31 - 1), st.integers(1, 4), st.floats(0.05, 0.99))
def test_throughput_normalized(seed, n, kappa):
    inst = generate_instance(n, kappa, seed)
    sums = np.concatenate([inst.lam.sum(axis=0), inst.lam.sum(axis=1)])
    assert abs(sums.max() - kappa) <= 1e-12
    assert np.all((inst.cost > 0) & (inst.cost < 1))
    assert np.all((inst.q0 >= 1) & (inst.q0 <= 100) & (inst.q0 == np.round(inst.q0)))
    assert inst.meta["seed"] == seed and inst.meta["lambda_distribution"] == "uniform(0,1)"


def test_same_seed_same_instance():
    a, b = generate_instance(3, 0.9, 42), generate_instance(3, 0.9, 42)
    assert a.dumps() == b.dumps()


def test_kappa_ratio():
    a, b = generate_instance(3, 0.7, 5), generate_instance(3, 0.9, 5)
    assert np.allclose(a.lam * 9, b.lam * 7, rtol=0, atol=1e-15)
    assert np.array_equal(a.cost, b.cost) and np.array_equal(a.q0, b.q0)


@pytest.mark.parametrize("kappa", [0.0, 1.0, -0.2, 1.5])
def test_invalid_kappa(kappa):
    with pytest.raises(InvalidKappa):
        generate_instance(3, kappa, 0)


def test_ex1_comparison():
    rep = run_comparison(ex1_instance(), dt=1e-2)
    assert rep.cost_opt == 0.0
    assert rep.drain_time == 0.0
    assert rep.cost_cmu > 0
    assert math.isnan(rep.relative_gap)


def test_clearing_problem_dominance():
    inst = generate_instance(3, 0.5, 3)
    inst = Instance(3, np.zeros((3, 3)), inst.cost, inst.q0)
    rep = run_comparison(inst)
    assert rep.status == "drained"
    for cost in rep.cost_mw.values():
        assert cost >= rep.cost_opt
    assert rep.relative_gap >= 0


@pytest.mark.parametrize("seed", range(5))
def test_gap_not_negative_beyond_discretization(seed):
    rep = run_comparison(generate_instance(3, 0.9, seed))
    assert rep.relative_gap >= -5 * rep.dt
    assert rep.refined_gap >= -5 * rep.dt / 2


def test_refinement_is_close():
    rep = run_comparison(generate_instance(3, 0.9, 1))
    assert abs(rep.cost_mw_refined - rep.cost_mw["queue"]) / rep.cost_opt < 0.05


def test_weight_mode_selects_gap():
    inst = generate_instance(3, 0.9, 2)
    a = run_comparison(inst, weight_mode="queue", refine=False)
    b = run_comparison(inst, weight_mode="cq", refine=False)
    assert a.cost_mw == b.cost_mw
    assert a.relative_gap == pytest.approx((a.cost_mw["queue"] - a.cost_opt) / a.cost_opt)
    assert b.relative_gap == pytest.approx((b.cost_mw["cq"] - b.cost_opt) / b.cost_opt)


def test_non_drained_report():
    inst = generate_instance(2, 0.9, 0)
    rep = run_comparison(inst, horizon=1.0)
    assert rep.status == "non_drained"
    assert math.isnan(rep.relative_gap)


def test_artifacts_written(tmp_path):
    rep = run_comparison(generate_instance(2, 0.7, 0), out_dir=tmp_path)
    for path in rep.artifacts.values():
        with open(path) as fh:
            assert len(list(csv.reader(fh))) > 2


def test_single_instance_batch_matches_comparison(tmp_path):
    reports, summary = batch_histogram(3, 0.9, 1, seed=11, out_csv=tmp_path / "g.csv")
    seed = instance_seeds(11, 1)[0]
    direct = run_comparison(generate_instance(3, 0.9, seed))
    assert reports[0].relative_gap == direct.relative_gap
    assert summary.mean_gap == direct.relative_gap
    rows = list(csv.DictReader(open(tmp_path / "g.csv")))
    assert len(rows) == 1 and int(rows[0]["seed"]) == seed
    assert float(rows[0]["relative_gap"]) == direct.relative_gap


def test_batch_reproducible(tmp_path):
    batch_histogram(2, 0.8, 3, seed=4, out_csv=tmp_path / "a.csv")
    batch_histogram(2, 0.8, 3, seed=4, out_csv=tmp_path / "b.csv", workers=2)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv.summary.csv").read_bytes() == (tmp_path / "b.csv.summary.csv").read_bytes()


def test_seeds_distinct():
    seeds = instance_seeds(0, 100)
    assert len(set(seeds)) == 100
    assert instance_seeds(0, 5) == seeds[:5]


def test_report_csv_round_trip(tmp_path):
    rep = run_comparison(generate_instance(2, 0.6, 1), refine=False)
    write_reports_csv([rep], tmp_path / "r.csv")
    row = next(csv.DictReader(open(tmp_path / "r.csv")))
    assert float(row["cost_opt"]) == rep.cost_opt
    assert row["weight_mode"] == "queue"
