import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst
from scipy import stats as sps

from anisonet import stats as st


# --- rates -----------------------------------------------------------------

def test_rates_trivial():
    assert st.mean_firing_rate(np.ones((10, 4), bool)) == 1.0
    r = np.zeros((10, 4), bool)
    r[:, :2] = True
    assert st.mean_firing_rate(r) == 0.5
    np.testing.assert_array_equal(st.population_rate(r), np.full(10, 0.5))
    assert st.mean_firing_rate(np.zeros((0, 3))) == 0.0


def test_group_rates_uniform_and_confined():
    r = np.ones((5, 3600), bool)
    g = st.group_rates(r)
    assert g.shape == (36,)
    np.testing.assert_array_equal(g, np.ones(36))
    r = np.zeros((5, 3600), bool)
    # neuron at row 25, col 43 lies in block (2, 4)
    r[:, 25 * 60 + 43] = True
    g = st.group_rates(r)
    assert np.flatnonzero(g).tolist() == [2 * 6 + 4]
    assert g[16] == pytest.approx(1 / 100)


def test_group_rates_ignore_trailing_neurons():
    r = np.zeros((4, 3600 + 72), bool)
    r[:, 3600:] = True
    assert not st.group_rates(r).any()


# --- Fano ------------------------------------------------------------------

def test_fano_constant_series_is_zero():
    assert st.fano_counts(np.full(50, 3)) == 0.0
    assert st.fano_factor(np.ones((20, 5), bool), "population") == 0.0
    assert st.fano_factor(np.ones((20, 5), bool)) == 0.0


def test_fano_poisson_counts_near_one(rng):
    assert abs(st.fano_counts(rng.poisson(4.0, 10_000)) - 1.0) < 0.1


def test_fano_bernoulli_neuron_is_one_minus_p(rng):
    # a binary series with rate p has variance p(1-p)
    r = rng.random((20_000, 3)) < 0.2
    assert st.fano_factor(r) == pytest.approx(0.8, abs=0.02)


def test_fano_silent_and_unknown_mode():
    assert np.isnan(st.fano_factor(np.zeros((5, 5), bool)))
    assert np.isnan(st.fano_counts(np.zeros(5)))
    with pytest.raises(ValueError):
        st.fano_factor(np.zeros((5, 5)), "window")


def test_fano_population_matches_numpy(rng):
    r = rng.random((100, 30)) < 0.1
    c = r.sum(1)
    assert st.fano_factor(r, "population") == pytest.approx(c.var() / c.mean(), rel=1e-12)


# --- pairwise differences --------------------------------------------------

def test_hamming_trivial():
    a = np.array([1, 0, 1, 1], bool)
    assert st.hamming(a, a) == 0.0
    assert st.hamming(a, ~a) == 1.0
    r = np.zeros((4, 6, 5), bool)
    pd = st.pairwise_differences(r)
    assert pd.values.shape == (6, 6)
    assert not pd.values.any()


def test_pairwise_order_and_values(rng):
    r = rng.random((4, 3, 10)) < 0.5
    v = st.pairwise_hamming(r)
    for n, (i, j) in enumerate(itertools.combinations(range(4), 2)):
        np.testing.assert_allclose(v[n], (r[i] != r[j]).mean(axis=1))
    pd = st.PairwiseDifferences(v)
    np.testing.assert_allclose(pd.mean, v.mean(0))
    np.testing.assert_allclose(pd.at(2), v[:, 2])


def test_hamming_is_a_metric(rng):
    for _ in range(50):
        a, b, c = rng.random((3, 40)) < 0.5
        assert st.hamming(a, b) == st.hamming(b, a)
        assert st.hamming(a, c) <= st.hamming(a, b) + st.hamming(b, c) + 1e-15


# --- PCA -------------------------------------------------------------------

def test_pca_on_a_line(rng):
    t = rng.standard_normal((2, 50, 1))
    x = t * np.array([1.0, -2.0, 0.5]) + 3.0
    res = st.pca_project(x, k=2)
    assert res.explained_ratio[0] >= 0.999
    np.testing.assert_allclose(res.components.T @ res.components, np.eye(2), atol=1e-10)


@pytest.mark.parametrize("shape", [(3, 40, 6), (2, 5, 30)])
def test_pca_matches_svd_and_reconstructs(rng, shape):
    x = rng.standard_normal(shape) @ rng.standard_normal((shape[2], shape[2]))
    k = min(shape[2], shape[0] * shape[1] - 1)
    res = st.pca_project(x, k=k)
    flat = x.reshape(-1, shape[2])
    s = np.linalg.svd(flat - flat.mean(0), compute_uv=False)
    n = flat.shape[0]
    np.testing.assert_allclose(res.explained_variance[:s.size], s ** 2 / n, rtol=1e-8, atol=1e-10)
    assert res.total_variance == pytest.approx(flat.var(0).sum(), rel=1e-10)
    np.testing.assert_allclose(res.reconstruct(), x, atol=1e-8)
    errs = [((res.reconstruct(j) - x) ** 2).sum() for j in range(1, k + 1)]
    assert np.all(np.diff(errs) <= 1e-9)


def test_pca_sign_convention(rng):
    x = rng.standard_normal((2, 30, 4))
    c = st.pca_project(x, k=3).components
    for j in range(3):
        assert c[np.argmax(np.abs(c[:, j])), j] > 0


def test_pc1_statistics_trivial():
    p = np.tile(np.sin(np.arange(20.0)), (5, 1))
    nmse, mstd = st.pc1_statistics(p)
    assert nmse == 0.0
    assert mstd == pytest.approx(0.0, abs=1e-15)
    c = 3.0
    two = np.stack([np.sin(np.arange(20.0)), np.sin(np.arange(20.0)) + c])
    nmse, mstd = st.pc1_statistics(two)
    assert mstd == pytest.approx(c / 2)
    assert nmse == pytest.approx(c ** 2 / np.sin(np.arange(20.0)).var())


def test_pc1_statistics_accepts_3d(rng):
    p = rng.standard_normal((4, 10, 2))
    assert st.pc1_statistics(p) == st.pc1_statistics(p[..., 0])


# --- hypothesis tests ------------------------------------------------------

def test_mwu_exhaustive_three_by_three():
    # every split of the ranks 1..6 into two groups of three
    us = []
    for left in itertools.combinations(range(1, 7), 3):
        right = [v for v in range(1, 7) if v not in left]
        res = st.mann_whitney_u(left, right, continuity=False)
        brute = sum(a > b for a in left for b in right)
        assert res.statistic == brute
        us.append(brute)
    us = np.array(us)
    # exact null distribution: symmetric on 0..9, mean 4.5, variance n1 n2 (n+1)/12
    assert sorted(np.bincount(us).tolist()) == sorted([1, 1, 2, 3, 3, 3, 3, 2, 1, 1])
    assert us.mean() == 4.5
    assert us.var() == pytest.approx(3 * 3 * 7 / 12)


def test_mwu_disjoint_samples():
    r = st.mann_whitney_u([1, 2, 3, 4], [5, 6, 7, 8])
    assert r.statistic == 0.0
    assert st.mann_whitney_u([5, 6, 7], [1, 2, 3]).statistic == 9.0


@settings(max_examples=40, deadline=None)
@given(hst.lists(hst.integers(0, 6), min_size=3, max_size=25),
       hst.lists(hst.integers(0, 6), min_size=3, max_size=25), hst.booleans())
def test_mwu_matches_scipy(a, b, cc):
    mine = st.mann_whitney_u(a, b, continuity=cc)
    ref = sps.mannwhitneyu(a, b, use_continuity=cc, alternative="two-sided", method="asymptotic")
    assert mine.statistic == pytest.approx(ref.statistic)
    if np.isfinite(ref.pvalue):
        assert mine.p_value == pytest.approx(ref.pvalue, rel=1e-9, abs=1e-12)


def test_rankdata_matches_scipy(rng):
    x = rng.integers(0, 10, 60)
    np.testing.assert_array_equal(st.rankdata(x), sps.rankdata(x))


@settings(max_examples=40, deadline=None)
@given(hst.lists(hst.floats(-50, 50), min_size=3, max_size=30),
       hst.lists(hst.floats(-50, 50), min_size=3, max_size=30))
def test_ks_matches_scipy(a, b):
    mine = st.ks_two_sample(a, b)
    ref = sps.ks_2samp(a, b, method="exact")
    assert mine.statistic == pytest.approx(ref.statistic, abs=1e-12)
    # limiting distribution: 2 sum (-1)^(k-1) exp(-2 k^2 x^2)
    x = np.sqrt(len(a) * len(b) / (len(a) + len(b))) * mine.statistic
    if x > 0.3:
        k = np.arange(1, 200)
        series = 2 * np.sum((-1.0) ** (k - 1) * np.exp(-2 * k ** 2 * x ** 2))
        assert mine.p_value == pytest.approx(min(1.0, series), rel=1e-9, abs=1e-12)
    else:
        assert mine.p_value == pytest.approx(1.0, abs=1e-3)


def test_ks_trivial_and_step():
    r = st.ks_two_sample([1, 2, 3], [1, 2, 3])
    assert r.statistic == 0.0 and r.p_value == 1.0
    # F_a jumps to 3/4 at 0, F_b stays 0 until 1
    assert st.ks_two_sample([0, 0, 0, 1], [1, 1, 1, 1]).statistic == 0.75


@settings(max_examples=30, deadline=None)
@given(hst.integers(2, 4), hst.integers(3, 20), hst.integers(0, 10_000))
def test_levene_matches_scipy(k, n, seed):
    rng = np.random.default_rng(seed)
    groups = [rng.standard_normal(n + i) * (1 + i) for i in range(k)]
    mine = st.levene(*groups)
    ref = sps.levene(*groups, center="mean")
    assert mine.statistic == pytest.approx(ref.statistic, rel=1e-9)
    assert mine.p_value == pytest.approx(ref.pvalue, rel=1e-9, abs=1e-15)


def test_levene_detects_unequal_variance(rng):
    r = st.levene(rng.normal(0, 1, 100), rng.normal(0, 3, 100))
    assert r.p_value < 0.01
    assert r.statistic == pytest.approx(
        sps.f.isf(r.p_value, 1, 198), rel=1e-6)


def test_levene_size_rate_under_null():
    # p-values of the F approximation are roughly uniform for normal data
    rng = np.random.default_rng(11)
    ps = [st.levene(rng.standard_normal(100), rng.standard_normal(100)).p_value
          for _ in range(400)]
    assert 0.02 < np.mean(np.array(ps) < 0.05) < 0.09


def test_tests_reject_tiny_samples():
    for fn in (st.mann_whitney_u, st.ks_two_sample, st.levene):
        with pytest.raises(ValueError):
            fn([1, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        st.levene([1, 2, 3])


def test_levene_degenerate_groups():
    assert np.isnan(st.levene([1, 1, 1], [2, 2, 2]).statistic)
    r = st.levene([1, 1, 1], [0, 2, 0, 2])
    assert r.statistic == np.inf and r.p_value == 0.0


def test_trial_summary(rng):
    r = rng.random((3, 215, 50)) < 0.1
    r[:, :, 40:] = True  # non-excitatory neurons are ignored
    s = st.trial_summary(r, 40)
    assert s["plateau_rate"] == pytest.approx(r[:, 100:215, :40].mean())
    assert s["ramp_rate"] == pytest.approx(r[:, 1:51, :40].mean())
    assert 0 <= s["mean_rate"] <= 1
