"""Activity statistics and the hypothesis tests used to compare networks.

The three tests are written out by hand; scipy is only used for the
reference distributions (F, normal, Kolmogorov).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy import stats as sps


def mean_firing_rate(raster):
    """Spikes per neuron per step over the whole raster."""
    r = np.asarray(raster)
    if r.size == 0:
        return 0.0
    return float(r.sum() / r.size)


def population_rate(raster):
    """Fraction of neurons spiking at each step; ``(..., steps)``."""
    return np.asarray(raster, dtype=float).mean(axis=-1)


def group_rates(raster, side=60, group=10):
    """Mean rate of each ``group x group`` block of the excitatory sheet.

    ``raster`` is ``(steps, n)`` with the ``side**2`` excitatory neurons
    first.  Blocks are returned row-major (36 values for the defaults).
    """
    r = np.asarray(raster, dtype=float)[..., : side * side]
    per_neuron = r.reshape(-1, side * side).mean(axis=0).reshape(side, side)
    k = side // group
    return per_neuron.reshape(k, group, k, group).mean(axis=(1, 3)).ravel()


def fano_factor(raster, mode="neuron"):
    """Variance-to-mean ratio of spike counts for one trial.

    Parameters
    ----------
    raster : array, shape (steps, neurons)
    mode : {'neuron', 'population'}
        ``neuron``: the per-step count series of each neuron, averaged over
        neurons that spiked at least once.  ``population``: the per-step
        population count series.
    """
    r = np.asarray(raster, dtype=float)
    if mode == "population":
        counts = r.sum(axis=1)
        m = counts.mean()
        return float(counts.var() / m) if m > 0 else float("nan")
    if mode != "neuron":
        raise ValueError(f"unknown mode {mode!r}")
    m = r.mean(axis=0)
    active = m > 0
    if not active.any():
        return float("nan")
    return float((r[:, active].var(axis=0) / m[active]).mean())


def fano_counts(counts):
    """Fano factor of a 1D count series."""
    c = np.asarray(counts, dtype=float)
    m = c.mean()
    return float(c.var() / m) if m > 0 else float("nan")


def hamming(a, b):
    """Normalised Hamming distance between binary vectors along the last axis."""
    return (np.asarray(a, dtype=bool) != np.asarray(b, dtype=bool)).mean(axis=-1)


def pairwise_hamming(rasters):
    """Per-step Hamming distance for every trial pair.

    ``rasters`` is ``(trials, steps, neurons)``; returns ``(pairs, steps)``
    with pairs in ``itertools.combinations`` order.
    """
    r = np.asarray(rasters, dtype=bool)
    pairs = list(itertools.combinations(range(r.shape[0]), 2))
    out = np.empty((len(pairs), r.shape[1]))
    for n, (i, j) in enumerate(pairs):
        out[n] = hamming(r[i], r[j])
    return out


@dataclass(frozen=True)
class PairwiseDifferences:
    values: np.ndarray  # (pairs, steps)

    @property
    def mean(self):
        return self.values.mean(axis=0)

    @property
    def std(self):
        return self.values.std(axis=0)

    def at(self, step):
        return self.values[:, step]


def pairwise_differences(rasters) -> PairwiseDifferences:
    return PairwiseDifferences(pairwise_hamming(rasters))


# --------------------------------------------------------------------------
# PCA


@dataclass(frozen=True)
class PCAResult:
    """Principal axes of the stacked binned activity.

    ``components`` is ``(features, k)`` with orthonormal columns,
    ``explained_variance`` holds the full eigenvalue spectrum (descending),
    ``projections`` is ``(trials, samples, k)``.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    projections: np.ndarray

    @property
    def total_variance(self):
        return float(self.explained_variance.sum())

    @property
    def explained_ratio(self):
        tot = self.total_variance
        return self.explained_variance / tot if tot > 0 else self.explained_variance

    def reconstruct(self, k=None):
        k = self.components.shape[1] if k is None else k
        p = self.projections[..., :k]
        return p @ self.components[:, :k].T + self.mean


def pca_project(binned, k=2) -> PCAResult:
    """PCA of ``(trials, samples, features)`` data stacked over trials.

    Eigendecomposition of the sample covariance (or of the Gram matrix when
    there are fewer rows than features).  Component signs are fixed so that
    the largest-magnitude loading is positive.
    """
    x = np.asarray(binned, dtype=float)
    trials, samples, nf = x.shape
    flat = x.reshape(-1, nf)
    mean = flat.mean(axis=0)
    xc = flat - mean
    n = xc.shape[0]
    if nf <= n:
        evals, evecs = np.linalg.eigh(xc.T @ xc / n)
        evals, evecs = evals[::-1], evecs[:, ::-1]
    else:
        g_vals, g_vecs = np.linalg.eigh(xc @ xc.T / n)
        g_vals, g_vecs = g_vals[::-1], g_vecs[:, ::-1]
        keep = g_vals > g_vals[0] * 1e-12 if g_vals[0] > 0 else np.zeros(n, bool)
        evecs = np.zeros((nf, n))
        evecs[:, keep] = xc.T @ g_vecs[:, keep] / np.sqrt(n * g_vals[keep])
        evals = g_vals
    evals = np.clip(evals, 0.0, None)
    comps = evecs[:, :k].copy()
    for j in range(comps.shape[1]):
        i = np.argmax(np.abs(comps[:, j]))
        if comps[i, j] < 0:
            comps[:, j] *= -1
    proj = (xc @ comps).reshape(trials, samples, -1)
    return PCAResult(mean, comps, evals, proj)


def pc1_statistics(projections, reference=None):
    """Trial-to-trial spread of the PC1 time course.

    Returns ``(nmse, mean_std)``: the squared PC1 difference of every trial
    pair, averaged over time and divided by the variance of the reference
    trial's PC1 series (the first of each pair unless ``reference`` is
    given), averaged over pairs; and the per-step standard deviation across
    trials averaged over steps.
    """
    p = np.asarray(projections, dtype=float)
    pc1 = p[..., 0] if p.ndim == 3 else p
    mean_std = float(pc1.std(axis=0).mean())
    errs = []
    for i, j in itertools.combinations(range(pc1.shape[0]), 2):
        ref = pc1[i if reference is None else reference]
        v = ref.var()
        mse = ((pc1[i] - pc1[j]) ** 2).mean()
        if mse == 0:
            errs.append(0.0)
        else:
            errs.append(mse / v if v > 0 else np.inf)
    return float(np.mean(errs)) if errs else 0.0, mean_std


# --------------------------------------------------------------------------
# tests


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    test: str

    __test__ = False  # not a pytest class


def _check_sizes(*samples, minimum=3):
    for s in samples:
        if np.asarray(s).size < minimum:
            raise ValueError(f"each sample needs at least {minimum} values")


def levene(*samples) -> TestResult:
    """Levene's test on absolute deviations from the group means."""
    if len(samples) < 2:
        raise ValueError("need at least two samples")
    _check_sizes(*samples)
    groups = [np.asarray(s, dtype=float) for s in samples]
    z = [np.abs(g - g.mean()) for g in groups]
    n_i = np.array([g.size for g in groups], dtype=float)
    k, n = len(groups), n_i.sum()
    zbar_i = np.array([zi.mean() for zi in z])
    zbar = sum(zi.sum() for zi in z) / n
    between = (n_i * (zbar_i - zbar) ** 2).sum()
    within = sum(((zi - zm) ** 2).sum() for zi, zm in zip(z, zbar_i))
    if within == 0:
        stat = np.inf if between > 0 else np.nan
    else:
        stat = (n - k) / (k - 1) * between / within
    p = float(sps.f.sf(stat, k - 1, n - k)) if np.isfinite(stat) else (0.0 if stat == np.inf else 1.0)
    return TestResult(float(stat), p, "levene")


def rankdata(x):
    """Average ranks (1-based), ties share the mean rank."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(x.size)
    start = 0
    while start < x.size:
        stop = start + 1
        while stop < x.size and xs[stop] == xs[start]:
            stop += 1
        ranks[order[start:stop]] = 0.5 * (start + stop - 1) + 1.0
        start = stop
    return ranks


def mann_whitney_u(a, b, continuity=True) -> TestResult:
    """Two-sided Mann-Whitney U test, normal approximation with tie correction.

    The statistic is ``U`` of the first sample: the number of pairs with
    ``a > b`` plus half the ties.
    """
    _check_sizes(a, b)
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    n1, n2 = a.size, b.size
    ranks = rankdata(np.concatenate([a, b]))
    u1 = ranks[:n1].sum() - n1 * (n1 + 1) / 2
    n = n1 + n2
    _, counts = np.unique(np.concatenate([a, b]), return_counts=True)
    tie = (counts ** 3 - counts).sum()
    sigma = np.sqrt(n1 * n2 / 12.0 * ((n + 1) - tie / (n * (n - 1))))
    mu = n1 * n2 / 2.0
    if sigma == 0:
        return TestResult(float(u1), 1.0, "mann_whitney_u")
    dev = abs(u1 - mu) - (0.5 if continuity else 0.0)
    z = max(dev, 0.0) / sigma
    p = min(1.0, 2.0 * sps.norm.sf(z))
    return TestResult(float(u1), float(p), "mann_whitney_u")


def ks_two_sample(a, b) -> TestResult:
    """Two-sample Kolmogorov-Smirnov test with the asymptotic p-value."""
    _check_sizes(a, b)
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    d = float(np.abs(fa - fb).max())
    en = np.sqrt(a.size * b.size / (a.size + b.size))
    p = float(special.kolmogorov(en * d)) if d > 0 else 1.0
    return TestResult(d, min(1.0, p), "ks_two_sample")


def trial_summary(rasters, n_exc, plateau=(100, 215), ramp=(1, 51), fano_mode="neuron"):
    """Rate and variability summary of a ``(trials, steps, neurons)`` array."""
    exc = np.asarray(rasters)[:, :, :n_exc]
    pr = population_rate(exc)
    return {
        "plateau_rate": float(pr[:, plateau[0]:plateau[1]].mean()),
        "ramp_rate": float(pr[:, ramp[0]:ramp[1]].mean()),
        "mean_rate": mean_firing_rate(exc),
        "fano": float(np.nanmean([fano_factor(r, fano_mode) for r in exc])),
    }
