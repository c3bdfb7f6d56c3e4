import json
import math

import numpy as np
import pytest

from mipboost.bench import (METRICS, MethodSpec, aggregate, beta_error_decomposition,
                            confusion_counts, derive_seeds, read_report, replay_row,
                            run_experiment, validation_mse, write_report)
from mipboost.data import Dataset
from mipboost.pipeline import MipBoostConfig
from mipboost.scenarios import Correlation, ScenarioConfig, generate_scenario, unit_beta

SMALL = ScenarioConfig(n=60, p=8, k0=3, correlation=Correlation(alpha=0.5),
                       beta=unit_beta(8, 3), snr=3.0)
FAST = MipBoostConfig(v=5, eps_gap=0.0, maxtime=20, totaltime=60)


def test_confusion_examples():
    truth = range(10)
    assert confusion_counts({0, 1, 10}, truth) == (2, 1, 8)
    assert confusion_counts(truth, truth) == (10, 0, 0)
    assert confusion_counts((), truth) == (0, 0, 10)


def _ds(X, y):
    return Dataset(y=y, X=X, feature_names=[f"x{j}" for j in range(X.shape[1])])


def test_validation_mse_examples(rng):
    X = rng.normal(size=(30, 4))
    beta = np.array([1.0, -2.0, 0, 0])
    assert validation_mse(beta, _ds(X, X @ beta)) == pytest.approx(0, abs=1e-28)
    y = rng.normal(size=30)
    assert validation_mse(np.zeros(4), _ds(X, y)) == pytest.approx(np.mean(y ** 2))
    with pytest.raises(ValueError):
        validation_mse(np.zeros(3), _ds(X, y))


def test_validation_mse_monte_carlo():
    sc = ScenarioConfig(n=500, p=100, k0=10, correlation=Correlation(alpha=0.9),
                        beta=unit_beta(100, 10), snr=1.0)
    vals = []
    for r in range(20):
        train, truth = generate_scenario(sc, seed=2 * r)
        val, _ = generate_scenario(sc, seed=2 * r + 1)
        b = np.zeros(100)
        b[:10] = np.linalg.lstsq(train.X[:, :10], train.y, rcond=None)[0]
        vals.append(validation_mse(b, val))
    expect = truth.theta ** 2 * (1 + 10 / 500)
    assert abs(np.mean(vals) / expect - 1) <= 0.10


def test_beta_decomposition_examples():
    beta = np.array([1.0, 0.0, 2.0])
    assert beta_error_decomposition([beta, beta], beta) == (0.0, 0.0)
    e = np.eye(3)[1]
    bias2, var = beta_error_decomposition([beta + e, beta - e], beta)
    assert bias2 == pytest.approx(0) and var == pytest.approx(1)
    with pytest.raises(ValueError):
        beta_error_decomposition([beta], beta)
    with pytest.raises(ValueError):
        beta_error_decomposition([beta, beta], beta[:2])


def _true_support_ols_replicates(R=50):
    sc = ScenarioConfig(n=100, p=10, k0=3, correlation=Correlation(alpha=0.5),
                        beta=unit_beta(10, 3), snr=1.0)
    rng = np.random.default_rng(0)
    d, truth = generate_scenario(sc, seed=99)
    hats = []
    for _ in range(R):  # fixed design, fresh noise
        y = d.X @ sc.beta + truth.theta * rng.normal(size=sc.n)
        b = np.zeros(10)
        b[:3] = np.linalg.lstsq(d.X[:, :3], y, rcond=None)[0]
        hats.append(b)
    return beta_error_decomposition(hats, sc.beta)


def test_ols_on_true_support_is_unbiased():
    # For an unbiased estimator the mean of R draws still carries noise, so that
    # E[bias2] = variance / (R - 1); here bias2 / (variance / (R - 1)) is roughly chi2_3 / 3.
    R = 50
    bias2, var = _true_support_ols_replicates(R)
    assert bias2 < 4 * var / (R - 1)


@pytest.mark.xfail(strict=False, reason="bias2 of an unbiased estimator averages variance/(R-1) "
                                        "= 0.02 * variance at R = 50, above the 1e-2 threshold")
def test_ols_unbiased_at_one_percent_of_variance():
    bias2, var = _true_support_ols_replicates(50)
    assert bias2 < 1e-2 * var


def test_seeds_are_disjoint():
    seen_train, seen_val = set(), set()
    for si in range(3):
        for r in range(20):
            t, v = derive_seeds(7, si, r)
            assert t != v
            seen_train.add(t)
            seen_val.add(v)
    assert not seen_train & seen_val
    assert derive_seeds(7, 1, 2) == derive_seeds(7, 1, 2)


def test_method_spec():
    assert MethodSpec.parse("lasso_min+w") == MethodSpec("lasso_min", True)
    assert MethodSpec("fs").label() == "fs"
    with pytest.raises(ValueError):
        MethodSpec.parse("ridge")


@pytest.fixture(scope="module")
def small_run():
    return run_experiment([SMALL], ["mipboost", "lasso_min", "lasso_1sd", "fs"], replicates=2,
                          seed=3, cfg=FAST)


def test_counting_and_row_invariants(small_run):
    rows, aggs = small_run
    assert len(rows) == 8 and len(aggs) == 4
    for r in rows:
        assert r["status"] == "ok", r["error"]
        support = [int(s) for s in r["support"].split(";")] if r["support"] else []
        assert r["tp"] + r["fp"] == len(support) and r["tp"] <= SMALL.k0
        assert json.loads(r["settings"])["train_seed"] == r["train_seed"]
    assert all(a["runs"] == 2 and a["failed"] == 0 for a in aggs)


def test_aggregates_recomputed_from_csv(small_run, tmp_path):
    rows, aggs = small_run
    paths = write_report(rows, aggs, tmp_path)
    again = aggregate(read_report(paths["report"]))
    for a, b in zip(aggs, again):
        assert a.keys() == b.keys()
        for k in a:
            if isinstance(a[k], float) and math.isnan(a[k]):
                assert math.isnan(b[k])
            else:
                assert a[k] == b[k], k
    long_lines = paths["long"].read_text().splitlines()
    assert len(long_lines) == 1 + 8 * len(METRICS)
    assert "wall_time" not in paths["report"].read_text().splitlines()[0]


def test_replay_sampled_rows(small_run):
    rows, _ = small_run
    for r in (rows[0], rows[5]):
        again = replay_row(r)
        for k in ("support", "beta_hat", "validation_mse", "k_hat", "tp", "fp"):
            assert again[k] == r[k]


def test_whitening_pairs_and_failures():
    wide = ScenarioConfig(n=20, p=30, k0=2, correlation=Correlation(alpha=0.3),
                          beta=unit_beta(30, 2), snr=2.0)
    rows, _ = run_experiment([SMALL, wide], ["lasso_min", "lasso_min+w"], replicates=1, seed=1,
                             cfg=FAST)
    assert [(r["scenario"], r["whiten"]) for r in rows[:2]] == [(SMALL.name, False),
                                                                (SMALL.name, True)]
    assert rows[0]["train_seed"] == rows[1]["train_seed"]
    assert all(r["status"] == "ok" for r in rows), [r["error"] for r in rows]  # p >= n uses R
    # a pipeline that cannot run is recorded, not raised
    bad = MipBoostConfig(v=SMALL.n + 1)  # more folds than rows
    rows, aggs = run_experiment([SMALL], ["fs"], replicates=1, cfg=bad)
    assert rows[0]["status"] == "failed" and rows[0]["error"]
    assert aggs[0]["failed"] == 1 and math.isnan(aggs[0]["tp_mean"])
