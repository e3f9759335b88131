"""Acceptance checks at full scale, one PASS/FAIL line per criterion.

Run under pytest (the lines are repeated in the terminal summary) or
directly with ``python3 tests/test_acceptance.py``.
"""

import functools
import itertools
import json
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from anisonet import cli
from anisonet import pipeline as pl
from anisonet import readout as ro
from anisonet import stats as st
from anisonet.config import RunConfig


class Context:
    """Lazily computed full-scale runs shared by the criteria."""

    def __init__(self):
        self.run = RunConfig()
        self.cfgs = pl.network_configs(self.run)

    @functools.cached_property
    def build_times(self):
        out = {}
        for kind, cfg in self.cfgs.items():
            t0 = time.perf_counter()
            conn = pl.build(cfg)
            out[kind] = (time.perf_counter() - t0, conn)
        return out

    @functools.cache
    def experiment(self, kind):
        t0 = time.perf_counter()
        conn, ts = pl.experiment(self.cfgs[kind])
        m = pl.activity_metrics(ts)
        return conn, ts, m, time.perf_counter() - t0

    @functools.cached_property
    def trajectories(self):
        return pl.trajectory_matrix(self.run.trajectories, seed=self.run.trajectory_seed)

    @functools.cache
    def task_error(self, kind, task, method):
        _, ts, _, _ = self.experiment(kind)
        if method == "ols":
            feats, tests = ts.features("pooling"), self.run.test_trials
        else:
            feats, tests = ts.features("excitatory"), self.run.enet_test_trials
        enet = ro.ElasticNetConfig(self.run.alpha, self.run.l1_ratio,
                                   max_iter=self.run.enet_max_iter)
        t0 = time.perf_counter()
        res = pl.evaluate_tasks(feats, self.trajectories, task, method, tests, enet)
        return float(res["nrmse"].mean()), time.perf_counter() - t0


CTX = Context()


def _line(n, ok, detail):
    return f"C{n} {'PASS' if ok else 'FAIL'}  {detail}"


# --------------------------------------------------------------------------


def criterion_1():
    parts = []
    for kind, (sec, conn) in CTX.build_times.items():
        rec = conn.source < conn.n_exc + conn.n_inh
        src, tgt = conn.source[rec], conn.target[rec]
        to_e = np.bincount(src[tgt < conn.n_exc], minlength=conn.n_exc + conn.n_inh)
        to_i = np.bincount(src[(tgt >= conn.n_exc) & (tgt < conn.n_exc + conn.n_inh)],
                           minlength=conn.n_exc + conn.n_inh)
        pairs = src.astype(np.int64) * conn.n_neurons + tgt
        ok = (np.all(to_e == 180) and np.all(to_i == 45) and not np.any(src == tgt)
              and np.unique(pairs).size == pairs.size and sec < 1.0)
        parts.append((ok, f"{kind}: degrees 180/45 exact={ok}, build {sec:.2f}s"))
    return all(p[0] for p in parts), "; ".join(p[1] for p in parts)


def criterion_2():
    _, _, m, sec = CTX.experiment("anisotropic")
    rate_ok = 0.08 <= m["plateau_rate"] <= 0.22
    ramp_ok = m["ramp_rate"] < 0.5 * m["plateau_rate"]
    return rate_ok and ramp_ok and sec < 60, (
        f"plateau rate {m['plateau_rate']:.3f} in [0.08, 0.22]: {rate_ok}; "
        f"ramp/plateau {m['ramp_ratio']:.3f} < 0.5: {ramp_ok}; {sec:.1f}s")


def criterion_3():
    fa = CTX.experiment("anisotropic")[2]["fano"]
    fr = CTX.experiment("random")[2]["fano"]
    ok = 0.7 <= fa <= 0.95 and 0.7 <= fr <= 0.95
    return ok, f"FF anisotropic {fa:.3f}, random {fr:.3f} (band [0.7, 0.95])"


def criterion_4():
    ma = CTX.experiment("anisotropic")[2]
    mr = CTX.experiment("random")[2]
    late = slice(51, None)
    ratio = ma["pairwise_mean"][late] / mr["pairwise_mean"][late]
    ham_ok = bool(np.all(ratio < 0.5))
    nmse_ratio = ma["pc1_nmse"] / mr["pc1_nmse"]
    std_ratio = ma["pc1_mean_std"] / mr["pc1_mean_std"]
    ok = ham_ok and nmse_ratio < 0.1 and std_ratio < 0.5
    return ok, (f"Hamming ratio max {ratio.max():.3f} (< 0.5 for all steps > 50: {ham_ok}); "
                f"PC1 nMSE ratio {nmse_ratio:.3f} (< 0.1); PC1 std ratio {std_ratio:.3f} (< 0.5)")


def _mwu_exhaustive_ok():
    for left in itertools.combinations(range(1, 7), 3):
        right = [v for v in range(1, 7) if v not in left]
        if st.mann_whitney_u(left, right).statistic != sum(a > b for a in left for b in right):
            return False
    return True


def criterion_5():
    pa = CTX.experiment("anisotropic")[2]["levene_10_190"]
    pr = CTX.experiment("random")[2]["levene_10_190"]
    va = CTX.experiment("anisotropic")[2]["pairwise_values"]
    grows = va[:, 190].var() > va[:, 10].var()
    oracle = _mwu_exhaustive_ok()
    ok = pa.p_value < 0.05 and grows and pr.p_value >= 0.05 and oracle
    return ok, (f"Levene 10 vs 190: anisotropic W={pa.statistic:.1f} p={pa.p_value:.2g} "
                f"(variance grows: {grows}), random W={pr.statistic:.2f} p={pr.p_value:.3f}; "
                f"exhaustive U oracle: {oracle}")


def criterion_6():
    ea, ta = CTX.task_error("anisotropic", "representation", "ols")
    er, _ = CTX.task_error("random", "representation", "ols")
    ok = ea <= 0.1 and ea < er and er > 3 * ea
    return ok, f"pooling NRMSE anisotropic {ea:.4f} (<= 0.1), random {er:.4f} (> 3x); {ta:.1f}s"


def criterion_7():
    pa, _ = CTX.task_error("anisotropic", "generalisation", "ols")
    pr, _ = CTX.task_error("random", "generalisation", "ols")
    ea, sec = CTX.task_error("anisotropic", "generalisation", "elasticnet")
    ok = pa < pr and pa <= 1.5 * ea and sec < 600
    return ok, (f"held-out pooling NRMSE anisotropic {pa:.4f} < random {pr:.4f}; "
                f"elastic net (excitatory) {ea:.4f}, ratio {pa / ea:.3f} (<= 1.5); "
                f"elastic net {sec:.0f}s")


def criterion_8():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((60, 5))
    y = x @ rng.standard_normal((5, 2)) + 0.1 * rng.standard_normal((60, 2))
    tol = 1e-7
    ols = ro.fit_ols(x, y)
    m0 = ro.fit_elastic_net(x, y, ro.ElasticNetConfig(alpha=0.0, tol=tol, max_iter=20_000))
    d_ols = float(np.abs(m0.weights - ols.weights).max())
    kkts, d_brute = [m0.meta["kkt"]], 0.0
    x3 = x[:, :3]
    for alpha, l1 in [(0.01, 0.5), (0.2, 0.9), (0.05, 0.05)]:
        m = ro.fit_elastic_net(x3, y[:, 0], ro.ElasticNetConfig(alpha, l1, 20_000, tol))
        kkts.append(m.meta["kkt"])
        d_brute = max(d_brute, float(np.abs(m.weights[:, 0] - _brute(x3, y[:, 0], alpha, l1)).max()))
    ok = d_ols <= 1e-6 and max(kkts) <= tol and d_brute <= 1e-6
    return ok, (f"|enet(alpha=0) - OLS| {d_ols:.1e}; max KKT {max(kkts):.1e} (tol {tol:g}); "
                f"|enet - brute force| {d_brute:.1e}")


def _brute(x, y, alpha, l1_ratio):
    n, p = x.shape
    mu, sd = x.mean(0), x.std(0)
    z = (x - mu) / sd
    yc = y - y.mean()
    l1, l2 = alpha * l1_ratio, alpha * (1 - l1_ratio)
    best, best_w = np.inf, None
    for signs in itertools.product((-1, 0, 1), repeat=p):
        s = np.array(signs, float)
        on = s != 0
        w = np.zeros(p)
        if on.any():
            zs = z[:, on]
            w[on] = np.linalg.solve(zs.T @ zs / n + l2 * np.eye(on.sum()),
                                    zs.T @ yc / n - l1 * s[on])
            if np.any(np.sign(w[on]) != s[on]):
                continue
        obj = ((yc - z @ w) ** 2).sum() / (2 * n) + l1 * np.abs(w).sum() + l2 / 2 * (w @ w)
        if obj < best:
            best, best_w = obj, w
    return best_w / sd


def criterion_9():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((200, 3))
    sm = ro.savgol_smooth(x, 21, 1)
    ma = np.column_stack([np.convolve(x[:, d], np.ones(21) / 21, mode="valid") for d in range(3)])
    d_ma = float(np.abs(sm[10:190] - ma).max())
    t = np.linspace(0, 2, 200)
    lin = np.column_stack([t, 3 - 2 * t, 0.5 * t])
    d_lin = float(np.abs(ro.savgol_smooth(lin, 21, 1) - lin).max())
    ok = d_ma <= 1e-12 and d_lin <= 1e-12
    return ok, f"|SG - moving average| {d_ma:.1e}; |SG(linear) - linear| {d_lin:.1e}"


def criterion_10():
    conn = CTX.build_times["anisotropic"][1]
    sec = pl.bench_trial(conn, horizon=200, readout="pooling", repeats=3)
    return sec < 2.0, f"200-step trial of {conn.n_neurons} neurons: {sec:.3f}s (< 2.0s)"


def criterion_11():
    names = ["events.csv", "binned.csv", "manifest.json", "metrics.json", "pairwise.csv",
             "pca.csv", "run.json"]
    with tempfile.TemporaryDirectory() as tmp:
        t0 = time.perf_counter()
        for rep in ("a", "b"):
            rc = cli.main(["--out", str(Path(tmp) / rep), "experiment"])
            if rc != 0:
                return False, f"experiment exited with {rc}"
        sec = time.perf_counter() - t0
        same = []
        for kind in ("anisotropic", "random"):
            for f in names:
                a = (Path(tmp) / "a" / "experiment" / kind / f).read_bytes()
                b = (Path(tmp) / "b" / "experiment" / kind / f).read_bytes()
                same.append(a == b)
        ca = json.loads((Path(tmp) / "a" / "experiment" / "comparison.json").read_text())
        cb = json.loads((Path(tmp) / "b" / "experiment" / "comparison.json").read_text())
        same.append(ca == cb)
    ok = all(same) and sec < 300
    return ok, f"{sum(same)}/{len(same)} output files byte-identical over two runs; {sec:.0f}s"


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 12)}


@pytest.mark.parametrize("n", list(CRITERIA))
def test_criterion(n, acceptance_report):
    ok, detail = CRITERIA[n]()
    line = _line(n, ok, detail)
    acceptance_report.append(line)
    print(line)
    assert ok, line


def main():
    failed = 0
    for n, fn in CRITERIA.items():
        ok, detail = fn()
        failed += not ok
        print(_line(n, ok, detail), flush=True)
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
