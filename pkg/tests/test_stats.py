import json
import math

import numpy as np
import pytest

from spinwalk import stats as ST


def test_report_schema_round_trip():
    rep = ST.TestReport("demo", 1.5, 2.0, pass_=True, p=0.3, n=10, provenance="unit test")
    payload = json.loads(rep.to_json())
    assert set(payload) == {"name", "statistic", "threshold", "p", "pass", "n", "provenance"}
    back = ST.report_from_dict(payload)
    assert back == rep


def test_ks_single_point():
    rep = ST.ks_test_1d([0.5], lambda x: np.clip(x, 0, 1))
    assert rep.statistic == pytest.approx(0.5)


def test_ks_calibrated_and_power(rng):
    u = rng.random(10_000)
    rep = ST.ks_test_1d(u, lambda x: np.clip(x, 0, 1))
    assert rep.statistic < 1.95 / math.sqrt(10_000)  # 99% band under the null
    assert rep.pass_
    shifted = np.clip(u + 0.05, 0, 1)
    assert not ST.ks_test_1d(shifted, lambda x: np.clip(x, 0, 1)).pass_


def test_ks_two_sample(rng):
    a = rng.standard_normal(4000)
    b = rng.standard_normal(4000)
    assert ST.ks_test_2samp(a, b).pass_
    assert not ST.ks_test_2samp(a, b + 0.2).pass_
    with pytest.raises(ValueError):
        ST.ks_test_1d([], lambda x: x)


def test_energy_same_collection_split(rng):
    pool = rng.standard_normal((1000, 2))
    rep = ST.energy_distance_test(pool[:500], pool[500:], n_perm=199, rng=rng)
    assert rep.pass_
    assert rep.p > 0.01


def test_energy_disjoint_support(rng):
    a = rng.random((200, 2))
    b = rng.random((200, 2)) + 10.0
    rep = ST.energy_distance_test(a, b, n_perm=99, rng=rng)
    assert not rep.pass_
    assert rep.p == pytest.approx(1.0 / 100.0)


def test_energy_power_mean_shift(rng):
    rejections = 0
    for k in range(10):
        a = rng.standard_normal((500, 1))
        b = rng.standard_normal((500, 1)) + 0.5
        rep = ST.energy_distance_test(a, b, n_perm=99, rng=rng)
        rejections += not rep.pass_
    assert rejections >= 9  # power > 0.9 at this separation


def test_energy_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        ST.energy_distance_test(rng.random((10, 2)), rng.random((10, 3)))


def test_energy_chunking_invariance(rng):
    a = rng.standard_normal((300, 2))
    b = rng.standard_normal((300, 2)) + 0.05
    r1 = ST.energy_distance_test(a, b, n_perm=49, rng=np.random.default_rng(5), chunk=64)
    r2 = ST.energy_distance_test(a, b, n_perm=49, rng=np.random.default_rng(5), chunk=4096)
    # float32 accumulation order differs across chunkings; the decision must not
    assert r1.statistic == pytest.approx(r2.statistic, rel=2e-3)
    assert abs(r1.p - r2.p) <= 0.04


def test_sphere_chi2_uniform(rng):
    x = rng.standard_normal((20_000, 2))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    rep = ST.sphere_chi2(x, density=None, bins=36)
    assert rep.pass_
    # point mass rejects
    point = np.tile([1.0, 0.0], (500, 1))
    assert not ST.sphere_chi2(point, density=None, bins=36).pass_


def test_sphere_chi2_d4_uniform(rng):
    x = rng.standard_normal((20_000, 4))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    assert ST.sphere_chi2(x, density=None).pass_


def test_sphere_chi2_nonuniform_density_self_consistency(rng):
    # sample from p(theta) = (1 + 0.3 cos theta) / 2pi by inverse CDF, then test
    grid = np.linspace(0, 2 * np.pi, 20_001)
    dens = (1 + 0.3 * np.cos(grid)) / (2 * np.pi)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    theta = np.interp(rng.random(30_000), cdf, grid)
    x = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    rep = ST.sphere_chi2(x, density=lambda t: (1 + 0.3 * np.cos(t)) / (2 * np.pi), bins=72)
    assert rep.pass_, (rep.statistic, rep.p)
    # and the same samples against uniform must reject
    assert not ST.sphere_chi2(x, density=None, bins=72).pass_


def test_distance_correlation(rng):
    u = rng.standard_normal(10_000)
    v = rng.standard_normal(10_000)
    assert ST.distance_correlation(u, v) < 0.05
    w = rng.standard_normal(2_000)
    assert ST.distance_correlation(w, w) > 0.999
    assert ST.distance_correlation(w, w**2) > 0.4
    with pytest.raises(ValueError):
        ST.distance_correlation([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        ST.distance_correlation(u[:10], v[:9])


def test_bootstrap_ci(rng):
    lo, hi = ST.bootstrap_ci(np.full(50, 3.0), np.mean, n_boot=200, rng=rng)
    assert lo == hi == 3.0
    x = rng.exponential(size=400)
    lo90, hi90 = ST.bootstrap_ci(x, np.mean, n_boot=500, level=0.90, rng=np.random.default_rng(1))
    lo99, hi99 = ST.bootstrap_ci(x, np.mean, n_boot=500, level=0.99, rng=np.random.default_rng(1))
    assert lo99 <= lo90 <= hi90 <= hi99
    assert lo90 < x.mean() < hi90
