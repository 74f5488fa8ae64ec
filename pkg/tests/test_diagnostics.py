import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.signal import lfilter

from spheremcmc.diagnostics import (
    ChainTrace,
    autocorrelation,
    binned_tv,
    diagnose,
    iact,
    kde_marginal,
    ks_statistic,
    ks_threshold,
    mean_with_ci,
    rmsjd,
    silverman_bandwidth,
)


def ar1(phi, n, rng):
    e = rng.standard_normal(n)
    return lfilter([1.0], [1.0, -phi], e)[1000:]


def test_autocorrelation_lag0_and_white_noise(rng):
    r = autocorrelation(rng.standard_normal(50_000))
    assert r[0] == pytest.approx(1.0)
    assert np.all(np.abs(r[1:20]) < 0.02)


def test_iact_iid(rng):
    assert iact(rng.standard_normal(100_000)) == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("phi", [0.5, 0.9])
def test_iact_ar1(phi, rng):
    exact = (1 + phi) / (1 - phi)
    assert iact(ar1(phi, 1_001_000, rng)) == pytest.approx(exact, rel=0.10)


def test_iact_edge_cases(rng):
    assert iact(np.full(500, 3.3)) == 1.0
    with pytest.raises(ValueError):
        iact(np.arange(50.0))
    with pytest.raises(ValueError):
        iact(np.r_[np.zeros(200), np.nan])


def test_iact_affine_invariant(rng):
    x = ar1(0.7, 20_000, rng)
    assert iact(3.0 * x - 7.0) == pytest.approx(iact(x), rel=1e-9)


def test_rmsjd_examples():
    assert rmsjd(np.array([[1.0, 0.0], [0.0, 1.0]])) == pytest.approx(math.pi / 2)
    s = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert rmsjd(s) == pytest.approx(math.sqrt((math.pi / 2) ** 2 / 2))
    with pytest.raises(ValueError):
        rmsjd(np.array([[1.0, 0.0]]))


def test_rmsjd_rotation_invariant(rng):
    s = rng.standard_normal((200, 4))
    s /= np.linalg.norm(s, axis=1, keepdims=True)
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    assert rmsjd(s @ q.T) == pytest.approx(rmsjd(s), rel=1e-10)


def test_trace_rmsjd_matches_states(rng):
    s = rng.standard_normal((101, 3))
    s /= np.linalg.norm(s, axis=1, keepdims=True)
    from spheremcmc.geometry import geodesic_distance

    jd = geodesic_distance(s[:-1], s[1:])
    tr = ChainTrace({"a": np.zeros(100)}, 100, 100, jd)
    assert tr.rmsjd == pytest.approx(rmsjd(s))


def test_ci_iid(rng):
    m, h = mean_with_ci(rng.standard_normal(10_000))
    assert h == pytest.approx(0.0196, rel=0.15)
    assert abs(m) < 4 * 0.01


def test_ci_shrinks_like_sqrt_n(rng):
    x = ar1(0.8, 401_000, rng)
    _, h_big = mean_with_ci(x)
    _, h_small = mean_with_ci(x[:100_000])
    assert h_small / h_big == pytest.approx(2.0, rel=0.2)


def test_ci_coverage_ar1(rng):
    hits = 0
    for _ in range(200):
        m, h = mean_with_ci(ar1(0.6, 6000, rng))
        hits += abs(m) <= h
    # binomial(200, 0.95) has sd ~ 3.1; allow for the small-sample tau bias
    assert hits >= 175


def test_ci_rejects_other_levels(rng):
    with pytest.raises(ValueError):
        mean_with_ci(rng.standard_normal(500), 0.9)


def test_silverman_gaussian(rng):
    x = rng.standard_normal(100_000)
    assert silverman_bandwidth(x) == pytest.approx(0.9 * 100_000 ** -0.2, rel=0.02)


def test_kde_gaussian_sup_error(rng):
    g = np.linspace(-3, 3, 121)
    f = kde_marginal(rng.standard_normal(100_000), g)
    assert np.max(np.abs(f - stats.norm.pdf(g))) < 0.02


def test_kde_arcsine_symmetry(rng):
    x = np.cos(math.pi * rng.random(20_000))
    x = np.r_[x, -x]
    g = np.linspace(-0.9, 0.9, 37)
    f = kde_marginal(x, g)
    np.testing.assert_allclose(f, f[::-1], rtol=1e-10)
    # interior density of the arcsine law
    interior = np.abs(g) < 0.6
    np.testing.assert_allclose(f[interior], 1 / (math.pi * np.sqrt(1 - g[interior] ** 2)), rtol=0.08)


def test_kde_translation_equivariant(rng):
    x = rng.standard_normal(5000)
    g = np.linspace(-2, 2, 11)
    np.testing.assert_allclose(kde_marginal(x + 5.0, g + 5.0), kde_marginal(x, g), rtol=1e-9)


def test_kde_guards(rng):
    with pytest.raises(ValueError):
        kde_marginal(rng.standard_normal(10), [0.0])
    with pytest.raises(ValueError):
        kde_marginal(np.ones(2000), [0.0])


def test_binned_tv_examples():
    assert binned_tv([0.1, 0.2], [0.3, 0.4], [0.0, 1.0]) == 0.0
    assert binned_tv([0.1], [1.5], [0.0, 1.0, 2.0]) == 1.0
    assert binned_tv([0.1, 1.5], [0.2, 0.3], [0.0, 1.0, 2.0]) == pytest.approx(0.5)
    assert binned_tv([2.0, 2.0], [2.0], 10) == 0.0
    with pytest.raises(ValueError):
        binned_tv([], [1.0], 3)


def test_binned_tv_normal_shift(rng):
    exact = 2 * stats.norm.cdf(0.5) - 1
    a, b = rng.standard_normal(200_000), 1.0 + rng.standard_normal(200_000)
    assert binned_tv(a, b, np.linspace(-6, 7, 131)) == pytest.approx(exact, abs=0.02)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_binned_tv_metric_axioms(seed):
    r = np.random.default_rng(seed)
    a, b, c = r.normal(0, 1, 300), r.normal(0.5, 1, 200), r.normal(0, 2, 250)
    edges = np.linspace(-8, 8, 33)
    ab, ba = binned_tv(a, b, edges), binned_tv(b, a, edges)
    assert ab == pytest.approx(ba)
    assert 0.0 <= ab <= 1.0
    assert ab <= binned_tv(a, c, edges) + binned_tv(c, b, edges) + 1e-12


def test_ks_threshold_matches_scipy_exact_scale():
    # c(0.01) = 1.6276
    assert ks_threshold(10**6, 10**6) == pytest.approx(1.6276 * math.sqrt(2e-6), rel=1e-3)
    assert ks_threshold(100, 400, 0.05) == pytest.approx(1.3581 * math.sqrt(500 / 40_000), rel=1e-3)


def test_ks_threshold_size(rng):
    n, rej = 2000, 0
    thr = ks_threshold(n, n, 0.05)
    for _ in range(300):
        rej += ks_statistic(rng.random(n), rng.random(n)) > thr
    assert rej / 300 == pytest.approx(0.05, abs=0.04)


def test_diagnose(rng):
    x = ar1(0.5, 21_000, rng)
    tr = ChainTrace({"x": x}, x.size, x.size // 2, np.full(x.size, 0.1), shrink_tries_total=2 * x.size)
    rep = diagnose(tr)
    assert rep.iact["x"] == pytest.approx(3.0, rel=0.2)
    assert rep.acceptance_rate == pytest.approx(0.5, abs=1e-3)
    assert rep.rmsjd == pytest.approx(0.1)
    assert rep.mean_shrink_tries == 2.0
    assert set(rep.to_dict()) >= {"iact", "mean", "half_ci"}


def test_trace_validation():
    with pytest.raises(ValueError):
        ChainTrace({"a": np.zeros(10)}, 10, 11, np.zeros(10))
    with pytest.raises(ValueError):
        ChainTrace({"a": np.zeros(10)}, 10, 5, np.zeros(9))
