"""End-to-end helpers shared by the command-line tool, demos and tests."""

from __future__ import annotations

import time

import numpy as np

from . import readout as ro
from . import stats as st
from .config import NetworkConfig, RunConfig
from .connectome import Connectome, build_anisotropic, build_random_control
from .neurocore import Simulator, inject_pulse
from .protocol import TrialSet, run_trials
from .trajectories import generate

LEVENE_STEPS = (10, 100, 190)


def build(cfg: NetworkConfig) -> Connectome:
    if cfg.kind == "anisotropic":
        return build_anisotropic(cfg)
    return build_random_control(cfg)


def network_configs(run: RunConfig) -> dict[str, NetworkConfig]:
    """Anisotropic network and its random control, keyed by kind."""
    return {"anisotropic": run.network.replace(kind="anisotropic"),
            "random": run.random_network()}


def experiment(cfg: NetworkConfig, readout="pooling") -> tuple[Connectome, TrialSet]:
    conn = build(cfg)
    return conn, run_trials(conn, cfg.neuron, readout=readout)


def activity_metrics(ts: TrialSet, fano_mode="neuron") -> dict:
    """Rates, variability, trial-to-trial differences and PC1 spread."""
    exc = ts.exc
    side = int(round(np.sqrt(ts.n_exc)))
    summary = st.trial_summary(ts.rasters, ts.n_exc, fano_mode=fano_mode)
    pd = st.pairwise_differences(exc)
    lev3 = st.levene(*(pd.at(s) for s in LEVENE_STEPS))
    lev2 = st.levene(pd.at(LEVENE_STEPS[0]), pd.at(LEVENE_STEPS[-1]))
    pca = st.pca_project(ts.features("excitatory"), k=2)
    nmse, mstd = st.pc1_statistics(pca.projections)
    groups = np.array([st.group_rates(r, side) for r in exc])
    return {
        **summary,
        "fano_population": float(np.nanmean([st.fano_factor(r, "population") for r in exc])),
        "ramp_ratio": summary["ramp_rate"] / summary["plateau_rate"]
        if summary["plateau_rate"] > 0 else float("nan"),
        "pool_rate": st.mean_firing_rate(ts.pool),
        "pairwise_mean": pd.mean,
        "pairwise_std": pd.std,
        "pairwise_values": pd.values,
        "levene_3": lev3,
        "levene_10_190": lev2,
        "pca_explained_ratio": pca.explained_ratio[:10],
        "pca": pca,
        "pc1_nmse": nmse,
        "pc1_mean_std": mstd,
        "group_rates": groups.mean(axis=0),
    }


def compare(metrics_a: dict, metrics_r: dict) -> dict:
    """Tests between two networks: group-rate distributions and late differences."""
    late = LEVENE_STEPS[-1]
    return {
        "ks_group_rates": st.ks_two_sample(metrics_a["group_rates"], metrics_r["group_rates"]),
        "mwu_group_rates": st.mann_whitney_u(metrics_a["group_rates"], metrics_r["group_rates"]),
        "mwu_pairwise_late": st.mann_whitney_u(
            metrics_a["pairwise_values"][:, late], metrics_r["pairwise_values"][:, late]
        ),
    }


def trajectory_matrix(names, seed=0, jitter=0.0):
    """The named trajectories as a list of ``(200, 3)`` arrays."""
    return [generate(nm, seed=seed, jitter=jitter).samples for nm in names]


def _zscore(y):
    mu, sd = y.mean(axis=0), y.std(axis=0)
    return mu, np.where(sd > 0, sd, 1.0)


def evaluate_tasks(features, trajectories, kind, method, test_trials=None,
                   enet: ro.ElasticNetConfig | None = None, keep_predictions=False):
    """NRMSE of every trajectory for one (task kind, method) pair.

    All trajectories share the features, so one model with ``3 * len(trajectories)``
    outputs is fitted per training set.  Returns a dict with ``nrmse``
    (trajectories, test trials, 3) and optionally the raw and smoothed
    predictions of the first test trial.
    """
    f = np.asarray(features, dtype=float)
    n_trials = f.shape[0]
    test_trials = list(range(n_trials)) if test_trials is None else list(test_trials)
    ys = [np.asarray(y, dtype=float) for y in trajectories]
    norms = [_zscore(y) for y in ys]
    target = np.hstack([(y - mu) / sd for y, (mu, sd) in zip(ys, norms)])

    def fit(train):
        xs = f[train].reshape(-1, f.shape[-1])
        return ro.fit_readout(xs, np.tile(target, (len(train), 1)), method, enet)

    errs = np.zeros((len(ys), len(test_trials), 3))
    preds = {}
    models = []
    shared = fit(list(range(n_trials))) if kind == "representation" else None
    for t_i, k in enumerate(test_trials):
        if kind == "representation":
            task = ro.TaskSpec.representation(k, n_trials)
            model = shared
        else:
            task = ro.TaskSpec.generalisation(k, n_trials)
            model = fit(list(task.train_trials))
        models.append(model)
        out = model.predict(f[k])
        for j, (y, (mu, sd)) in enumerate(zip(ys, norms)):
            raw = out[:, 3 * j:3 * j + 3] * sd + mu
            smooth = ro.savgol_smooth(raw)
            errs[j, t_i] = ro.nrmse(smooth, y, per_dim=True)
            if keep_predictions and t_i == 0:
                preds[j] = (raw, smooth)
    meta = [m.meta for m in models]
    return {"nrmse": errs, "predictions": preds, "test_trials": test_trials, "meta": meta,
            "models": models}


def bench_trial(conn: Connectome, params=None, horizon=200, readout="pooling", repeats=3):
    """Best-of-``repeats`` wall time of one trial of ``horizon`` steps.

    Only the readout population is copied into the raster, as a readout
    would see it.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    params = params or conn.config.neuron
    sim = Simulator(conn.weight_matrix(), params)
    record = (np.arange(conn.n_neurons)[conn.pool_slice] if readout == "pooling"
              else np.arange(conn.n_exc))
    pattern = conn.input_patch[1:]
    best = np.inf
    for _ in range(repeats):
        sim.reset()
        t0 = time.perf_counter()
        sim.run(horizon, inject_pulse(pattern, 0, params=params), record=record)
        best = min(best, time.perf_counter() - t0)
    return best
