import itertools
import json

import numpy as np
import pytest
from scipy.stats import norm

from ustatcpd.errors import ConfigError, InconclusiveError
from ustatcpd.simulation import (
    Covariance,
    SimulationConfig,
    change_vector,
    estimate_overshoots,
    replicate_rng,
    run_arl_experiment,
    run_edd_experiment,
    sample_stream,
)

TINY = dict(p=20, n0=40, H=20, replications=12, nominal_arl=200.0, covariance=Covariance("ar1", 0.5))


def draws(cov, n, p, seed):
    cfg = SimulationConfig(p=p, n0=5, H=5, covariance=cov)
    return np.array(list(itertools.islice(sample_stream(cfg, np.random.default_rng(seed)), n)))


def within_cov_band(X, Sigma):
    """Every sample-covariance entry within k SE of Sigma.

    k is the 3-SE (0.27%) two-sided level, Bonferroni-adjusted over the
    p(p+1)/2 distinct entries so the whole check keeps that false-alarm rate.
    """
    n, p = X.shape
    m = p * (p + 1) // 2
    k = norm.isf(norm.sf(3.0) / m)
    S = X.T @ X / n
    # Var(x_i x_j) = S_ii S_jj + S_ij^2 for zero-mean Gaussians
    se = np.sqrt((np.outer(np.diag(Sigma), np.diag(Sigma)) + Sigma**2) / n)
    return np.all(np.abs(S - Sigma) < k * se)


def test_identity_stream_moments():
    X = draws(Covariance("ar1", 0.0), 100_000, 5, seed=1)
    assert within_cov_band(X, np.eye(5))


def test_ar1_stream_moments():
    X = draws(Covariance("ar1", 0.5), 100_000, 3, seed=2)
    Sigma = np.array([[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]])
    assert within_cov_band(X, Sigma)


def test_cholesky_stream_moments():
    Sigma = np.array([[2.0, 0.3, -0.4], [0.3, 1.0, 0.2], [-0.4, 0.2, 0.5]])
    X = draws(Covariance("matrix", matrix=Sigma), 100_000, 3, seed=3)
    assert within_cov_band(X, Sigma)


def test_non_positive_definite_rejected():
    with pytest.raises(ConfigError):
        Covariance("matrix", matrix=np.array([[1.0, 2.0], [2.0, 1.0]]))


@pytest.mark.parametrize("rho", [-1.0, 1.0, 1.5])
def test_ar1_coefficient_range(rho):
    with pytest.raises(ConfigError):
        Covariance("ar1", rho)


def test_covariance_parse():
    assert Covariance.parse("ar1:0.5") == Covariance("ar1", 0.5)
    assert Covariance.parse("identity") == Covariance("identity")
    with pytest.raises(ConfigError):
        Covariance.parse("toeplitz")


def test_change_vector_norms():
    assert np.all(change_vector(7, 0.0) == 0.0)
    np.testing.assert_allclose(change_vector(4, 2.0), np.ones(4))
    v = change_vector(6, 5.0, "first-k", k=1)
    assert v[0] == 5.0 and np.all(v[1:] == 0)
    for pat, k in [("dense", 1), ("first-k", 3)]:
        assert np.linalg.norm(change_vector(50, 7.3, pat, k)) == pytest.approx(7.3, rel=1e-14)


def test_stream_applies_shift_after_tau():
    cfg = SimulationConfig(p=4, n0=5, H=5, tau=300, delta=1000.0, covariance=Covariance("identity"))
    X = np.array(list(itertools.islice(sample_stream(cfg, np.random.default_rng(0)), 600)))
    assert np.all(np.abs(X[:300]) < 10)
    assert np.all(X[300:] > 400)


def test_zero_delta_stream_is_null():
    cfg = SimulationConfig(p=10, n0=5, H=5, tau=500, delta=0.0, covariance=Covariance("identity"))
    X = np.array(list(itertools.islice(sample_stream(cfg, np.random.default_rng(5)), 1000)))
    diff = X[:500].mean(0) - X[500:].mean(0)
    # two-sample chi-square test on the mean difference
    stat = diff @ diff / (2 / 500)
    assert stat < 10 + 4 * np.sqrt(20)


def test_replicate_rng_depends_only_on_seed_and_index():
    a = replicate_rng(7, 3).standard_normal(4)
    b = replicate_rng(7, 3).standard_normal(4)
    c = replicate_rng(7, 4).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


@pytest.mark.parametrize("bad", [dict(replications=0), dict(delta=-1.0), dict(rule="median"),
                                 dict(tau=10), dict(workers=0)])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        SimulationConfig(**{**TINY, **bad})


def test_arl_experiment_reproducible_and_se():
    cfg = SimulationConfig(**TINY, seed=3)
    r1, r2 = run_arl_experiment(cfg), run_arl_experiment(cfg)
    np.testing.assert_array_equal(r1.stopping_times, r2.stopping_times)
    assert r1.mean == r2.mean and r1.se == r2.se
    t = r1.stopping_times
    assert r1.se == pytest.approx(t.std(ddof=1) / np.sqrt(len(t)))
    d = json.loads(r1.to_json())
    assert d["stopping_times"] == [int(x) for x in t]


def test_parallel_matches_serial():
    serial = run_arl_experiment(SimulationConfig(**TINY, seed=9))
    parallel = run_arl_experiment(SimulationConfig(**TINY, seed=9, workers=3))
    np.testing.assert_array_equal(serial.stopping_times, parallel.stopping_times)


def test_infinite_threshold_all_censored():
    cfg = SimulationConfig(**{**TINY, "replications": 3, "nominal_arl": 30.0}, threshold=1e9)
    with pytest.raises(InconclusiveError) as exc:
        run_arl_experiment(cfg)
    res = exc.value.result
    assert res.n_censored == 3
    assert np.all(res.stopping_times == cfg.horizon)


def test_edd_experiment_basic():
    cfg = SimulationConfig(**TINY, delta=12.0, seed=1)
    res = run_edd_experiment(cfg)
    assert res.kind == "edd" and res.config["tau"] == cfg.n0
    assert res.n_censored == 0
    assert 1 <= res.mean < cfg.H


def test_edd_requires_change():
    with pytest.raises(ConfigError):
        run_edd_experiment(SimulationConfig(**TINY))


def test_overshoot_ordering():
    o = estimate_overshoots(SimulationConfig(**TINY, delta=8.0, seed=2))
    assert o.rho_min >= o.rho_max
    assert o.rho_min >= 0
    assert o.rho2 >= 0
    assert o.sigma_min < o.sigma_max


def test_overshoots_stable_under_doubling():
    o1 = estimate_overshoots(SimulationConfig(**{**TINY, "replications": 40}, delta=8.0, seed=4))
    o2 = estimate_overshoots(SimulationConfig(**{**TINY, "replications": 80}, delta=8.0, seed=4))
    for name in ("rho_min", "rho2"):
        v1, v2 = getattr(o1, name), getattr(o2, name)
        se = np.hypot(getattr(o1, name + "_se"), getattr(o2, name + "_se"))
        assert abs(v1 - v2) < 2 * se + 1e-12
