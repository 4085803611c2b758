import math

import numpy as np
import pytest

import implicit_sparse as isp


def orthonormal_instance(n=20):
    X = np.sqrt(n) * np.eye(n)
    w = np.zeros(n)
    w[:3] = [1.0, 0.5, 0.25]
    return X, X @ w, w


def test_estimate_wmax_orthonormal():
    X, y, w = orthonormal_instance()
    e = isp.estimate_wmax(X, y)
    assert e["z_hat"] == pytest.approx(4.0 / 3.0, rel=1e-12)
    assert e["eta"] == pytest.approx(1.0 / (20 * e["z_hat"]), rel=1e-12)
    assert not e["degenerate"]


def test_alg1_recovers_noiseless_signal():
    X, y, w = orthonormal_instance()
    tr = isp.run_alg1(X, y, eta=0.05, alpha=1e-6, max_iters=3000, snapshot_every=100)
    assert len(tr["t"]) == 30
    assert tr["w"].shape == (30, 20)
    assert np.max(np.abs(tr["w"][-1] - w)) < 1e-6


def test_alg2_runs():
    X, y, w = orthonormal_instance()
    tr = isp.run_alg2(X, y, eta=0.05, alpha=1e-6, max_iters=2000)
    assert tr["stop_reason"] == "max-iters"
    assert set(np.unique(np.log2(tr["multipliers"]))) <= set(range(0, 20))


def test_lasso_matches_soft_threshold():
    X, y, w = orthonormal_instance()
    rng = np.random.default_rng(0)
    y = y + 0.1 * rng.standard_normal(len(y))
    w_ls = X.T @ y / len(y)
    got, converged, sweeps = isp.lasso(X, y, 0.2)
    assert converged
    assert np.max(np.abs(got - isp.soft_threshold(w_ls, 0.2))) < 1e-8


def test_oracle_ls_and_errors():
    X, y, w = orthonormal_instance()
    assert np.allclose(isp.oracle_ls(X, y, [0, 1, 2]), w)
    with pytest.raises(ValueError):
        isp.oracle_ls(X, y[:-1], [0])


def test_threshold():
    got = isp.phase_transition_threshold(1.0, 10000, 500)
    assert got == pytest.approx(2 * math.sqrt(2 * math.log(20000)) / math.sqrt(500))


def test_design_columns():
    X = isp.generate_design("rademacher", 30, 10, seed=3)
    assert X.shape == (30, 10)
    assert set(np.unique(X)) == {-1.0, 1.0}


def test_small_sweep():
    cfg = """{"preset": "desk", "n": 40, "d": 80, "k": 2, "sigma": 0.2, "repetitions": 2,
              "max_iters": 300, "axis": {"name": "gamma", "values": [1]},
              "lasso": {"path_length": 20}}"""
    trials, summary = isp.run_sweep(cfg)
    assert summary.splitlines()[0] == "family,axis_value,estimator,median_l2,p25_l2,p75_l2,excluded_trials"
    assert len(summary.splitlines()) == 1 + 5
    assert isp.run_sweep(cfg) == (trials, summary)


def test_config_error():
    with pytest.raises(isp.ConfigError):
        isp.run_sweep('{"bogus": 1}')


def test_lemma_suite():
    failures = isp.lemma_suite(cases=10)
    assert len(failures) == 16
    assert all(v == 0 for v in failures.values())
