"""Command-line driver: ``anisonet {build,experiment,train-eval,bench,stats}``.

Science parameters come from a run-config file (``--config``); flags only
choose paths, network kinds and verbosity.  The output root is ``--out``,
else ``$ANISONET_OUT``, else ``output_dir`` of the config.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import pipeline as pl
from . import readout as ro
from .config import ConfigError, RunConfig, dump_run_config, load_run_config
from .connectome import save_connectome, save_landscape
from .protocol import load_trialset, save_trialset
from .stats import TestResult
from .trajectories import save_csv

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_NUMERIC = 5

ENV_OUT = "ANISONET_OUT"
BUDGET_S = 2.0

log = logging.getLogger("anisonet")


class NumericalError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# serialisation helpers


def _plain(obj):
    """JSON-ready copy: arrays to lists, test results to dicts."""
    if isinstance(obj, TestResult):
        return {"statistic": obj.statistic, "p_value": obj.p_value, "test": obj.test}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, obj):
    Path(path).write_text(json.dumps(_plain(obj), indent=1, sort_keys=True) + "\n")


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _kinds(arg):
    return ["anisotropic", "random"] if arg == "both" else [arg]


def output_root(args, run: RunConfig) -> Path:
    return Path(args.out or os.environ.get(ENV_OUT) or run.output_dir)


def write_manifest(directory: Path, run: RunConfig, kind: str | None, files):
    manifest = {
        "kind": kind,
        "run_digest": run.digest(),
        "network_digest": pl.network_configs(run)[kind].digest() if kind else None,
        "config": run.to_dict(),
        "files": {f: file_digest(directory / f) for f in files},
    }
    write_json(directory / "run.json", manifest)
    return manifest


def verify_manifest(directory: Path, run: RunConfig | None = None):
    """Check file hashes (and the config hash if ``run`` is given)."""
    path = directory / "run.json"
    if not path.exists():
        raise FileNotFoundError(f"{path} missing")
    manifest = json.loads(path.read_text())
    for name, digest in manifest["files"].items():
        if file_digest(directory / name) != digest:
            raise OSError(f"{directory / name}: content does not match its manifest hash")
    if run is not None and manifest["run_digest"] != run.digest():
        raise ConfigError("config", f"{directory} was produced by a different config")
    return manifest


# --------------------------------------------------------------------------
# commands


def cmd_build(args, run: RunConfig) -> int:
    root = output_root(args, run) / "build"
    for kind in _kinds(args.kind):
        cfg = pl.network_configs(run)[kind]
        conn = pl.build(cfg)
        d = root / kind
        d.mkdir(parents=True, exist_ok=True)
        files = ["connectome.csv"]
        save_connectome(conn, d / "connectome.csv")
        if conn.landscape is not None:
            save_landscape(conn.landscape, d / "landscape.csv")
            files.append("landscape.csv")
        write_manifest(d, run, kind, files)
        print(f"{kind}: {conn.n_neurons} neurons, {len(conn.source)} edges -> {d}")
    return EXIT_OK


def _metrics_record(m):
    keys = ["plateau_rate", "ramp_rate", "ramp_ratio", "mean_rate", "pool_rate", "fano",
            "fano_population", "levene_3", "levene_10_190", "pc1_nmse", "pc1_mean_std",
            "pca_explained_ratio", "group_rates"]
    return {k: m[k] for k in keys}


def write_experiment(d: Path, ts, metrics, svg=False):
    d.mkdir(parents=True, exist_ok=True)
    save_trialset(ts, d)
    steps = np.arange(len(metrics["pairwise_mean"]))
    np.savetxt(d / "pairwise.csv",
               np.column_stack([steps, metrics["pairwise_mean"], metrics["pairwise_std"]]),
               delimiter=",", header="step,mean,std", comments="", fmt=["%d", "%.10g", "%.10g"])
    proj = metrics["pca"].projections
    tr, row = np.meshgrid(np.arange(proj.shape[0]), np.arange(proj.shape[1]), indexing="ij")
    np.savetxt(d / "pca.csv",
               np.column_stack([tr.ravel(), row.ravel(), proj[..., 0].ravel(),
                                proj[..., 1].ravel()]),
               delimiter=",", header="trial,row,pc1,pc2", comments="",
               fmt=["%d", "%d", "%.10g", "%.10g"])
    write_json(d / "metrics.json", _metrics_record(metrics))
    files = ["events.csv", "binned.csv", "manifest.json", "pairwise.csv", "pca.csv",
             "metrics.json"]
    if svg:
        write_raster_svg(d / "raster.svg", ts.exc[0])
        files.append("raster.svg")
    return files


def write_raster_svg(path, raster, max_neurons=600):
    """Dot raster of one trial (a regular subset of neurons)."""
    steps, n = raster.shape
    stride = max(1, n // max_neurons)
    t, k = np.nonzero(raster[:, ::stride])
    w, h = 2 * steps + 20, k.max() + 20 if k.size else 40
    dots = "".join(f'<rect x="{10 + 2 * a}" y="{10 + b}" width="2" height="1"/>'
                   for a, b in zip(t, k))
    Path(path).write_text(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">'
        f'<g fill="black">{dots}</g></svg>\n'
    )


def cmd_experiment(args, run: RunConfig) -> int:
    kinds = _kinds(args.kind)
    if args.dry_run:
        print(dump_run_config(run))
        print(f"dry run: would run {', '.join(kinds)} into {output_root(args, run)}")
        return EXIT_OK
    root = output_root(args, run) / "experiment"
    results = {}
    for kind in kinds:
        cfg = pl.network_configs(run)[kind]
        conn, ts = pl.experiment(cfg, readout=run.readout)
        m = pl.activity_metrics(ts)
        results[kind] = m
        d = root / kind
        files = write_experiment(d, ts, m, svg=args.svg)
        write_manifest(d, run, kind, files)
        print(f"{kind}: plateau rate {m['plateau_rate']:.3f}, FF {m['fano']:.3f}, "
              f"PC1 nMSE {m['pc1_nmse']:.3f} -> {d}")
    if len(results) == 2:
        cmp = pl.compare(results["anisotropic"], results["random"])
        write_json(root / "comparison.json", cmp)
    return EXIT_OK


TABLE_HEADER = "network,task,trajectory,method,nrmse_x,nrmse_y,nrmse_z,nrmse_mean"


def train_eval_rows(run: RunConfig, trialsets: dict, out: Path | None = None):
    """Error table over networks x tasks x trajectories x methods.

    ``trialsets`` maps network kind to a TrialSet.  NRMSE values are averaged
    over the configured test trials.  When ``out`` is given, per-trajectory
    predictions of the first test trial and the representation models are
    written below it.
    """
    trajs = pl.trajectory_matrix(run.trajectories, seed=run.trajectory_seed)
    enet = ro.ElasticNetConfig(run.alpha, run.l1_ratio, max_iter=run.enet_max_iter)
    methods = {
        "ols-pooling": ("pooling", "ols", run.test_trials),
        "elasticnet-excitatory": ("excitatory", "elasticnet", run.enet_test_trials),
    }
    rows = []
    for kind, ts in trialsets.items():
        for task in ("representation", "generalisation"):
            for mname, (source, method, tests) in methods.items():
                feats = ts.features(source)
                res = pl.evaluate_tasks(feats, trajs, task, method, test_trials=tests,
                                        enet=enet, keep_predictions=out is not None)
                if out is not None and task == "representation":
                    save_model(out / "models" / f"{kind}_{mname}.csv", res["models"][0],
                               run.trajectories, source)
                err = res["nrmse"].mean(axis=1)
                if not np.all(np.isfinite(err)):
                    raise NumericalError(f"non-finite NRMSE for {kind}/{task}/{mname}")
                for j, name in enumerate(run.trajectories):
                    rows.append((kind, task, name, mname, *err[j], err[j].mean()))
                    if out is not None:
                        raw, smooth = res["predictions"][j]
                        stem = out / "predictions" / f"{kind}_{task}_{name}_{mname}"
                        stem.parent.mkdir(parents=True, exist_ok=True)
                        save_csv(f"{stem}_raw.csv", raw)
                        save_csv(f"{stem}_smooth.csv", smooth)
    return rows


def save_model(path, model: ro.ReadoutModel, names, source):
    """Columnar model export: feature index (-1 = intercept) and one weight
    column per trajectory dimension (targets are z-scored)."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    cols = [f"{n}_{ax}" for n in names for ax in "xyz"]
    np.savetxt(path, model.to_table(), delimiter=",", comments=f"# source={source}\n",
               header="feature," + ",".join(cols), fmt=["%d"] + ["%.12g"] * len(cols))


def write_table(path, rows):
    lines = [TABLE_HEADER]
    for r in rows:
        lines.append(",".join(list(r[:4]) + [f"{v:.10g}" for v in r[4:]]))
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_train_eval(args, run: RunConfig) -> int:
    root = output_root(args, run) / "train-eval"
    root.mkdir(parents=True, exist_ok=True)
    trialsets = {}
    for kind, cfg in pl.network_configs(run).items():
        _, trialsets[kind] = pl.experiment(cfg, readout="pooling")
    rows = train_eval_rows(run, trialsets, out=root)
    write_table(root / "table.csv", rows)
    for kind in trialsets:
        for mname in ("ols-pooling", "elasticnet-excitatory"):
            for task in ("representation", "generalisation"):
                e = [r[-1] for r in rows if r[0] == kind and r[1] == task and r[3] == mname]
                print(f"{kind:12s} {task:15s} {mname:22s} NRMSE {np.mean(e):.4f}")
    write_manifest(root, run, None, ["table.csv"])
    return EXIT_OK


def cmd_bench(args, run: RunConfig) -> int:
    if args.horizon < 1:
        raise ConfigError("horizon", "must be >= 1")
    report = []
    for kind, cfg in pl.network_configs(run).items():
        conn = pl.build(cfg)
        for readout in ("pooling", "excitatory"):
            sec = pl.bench_trial(conn, cfg.neuron, args.horizon, readout, args.repeats)
            per200 = sec * 200.0 / args.horizon
            report.append({
                "network": kind, "readout": readout, "horizon": args.horizon,
                "seconds": sec, "steps_per_s": args.horizon / sec,
                "realtime_ratio": per200 / BUDGET_S,
            })
            print(f"{kind:12s} {readout:10s} {sec:.3f} s for {args.horizon} steps "
                  f"({args.horizon / sec:.0f} steps/s, {per200 / BUDGET_S:.2f} x budget)")
    if args.out or os.environ.get(ENV_OUT):
        root = output_root(args, run) / "bench"
        root.mkdir(parents=True, exist_ok=True)
        write_json(root / "report.json", report)
    return EXIT_OK


def cmd_stats(args, run: RunConfig | None) -> int:
    """Recompute metrics from saved experiment directories."""
    metrics = {}
    for d in args.dirs:
        d = Path(d)
        verify_manifest(d, run)
        ts = load_trialset(d)
        metrics[str(d)] = pl.activity_metrics(ts)
        m = metrics[str(d)]
        print(f"{d}: plateau rate {m['plateau_rate']:.3f}, FF {m['fano']:.3f}, "
              f"Levene(10,100,190) W={m['levene_3'].statistic:.2f} p={m['levene_3'].p_value:.3g}")
    out = {k: _metrics_record(v) for k, v in metrics.items()}
    if len(args.dirs) == 2:
        a, b = (metrics[str(Path(d))] for d in args.dirs)
        out["comparison"] = pl.compare(a, b)
        for name, res in out["comparison"].items():
            print(f"{name}: statistic {res.statistic:.4g}, p {res.p_value:.3g}")
    if args.save:
        write_json(args.save, out)
    return EXIT_OK


# --------------------------------------------------------------------------


def make_parser():
    p = argparse.ArgumentParser(prog="anisonet", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="run-config file (default: built-in parameters)")
    p.add_argument("--out", help=f"output root (default: ${ENV_OUT} or the config)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build networks and export them")
    b.add_argument("--kind", choices=["anisotropic", "random", "both"], default="both")

    e = sub.add_parser("experiment", help="run the 25 trials and the statistics suite")
    e.add_argument("--kind", choices=["anisotropic", "random", "both"], default="both")
    e.add_argument("--dry-run", action="store_true", help="validate the config only")
    e.add_argument("--svg", action="store_true", help="also write a raster image")

    sub.add_parser("train-eval", help="trajectory readout error table")

    bn = sub.add_parser("bench", help="time single trials against the real-time budget")
    bn.add_argument("--horizon", type=int, default=200)
    bn.add_argument("--repeats", type=int, default=3)

    s = sub.add_parser("stats", help="recompute statistics from experiment directories")
    s.add_argument("dirs", nargs="+", help="one or two experiment directories")
    s.add_argument("--save", help="write the statistics as JSON")
    return p


COMMANDS = {
    "build": cmd_build,
    "experiment": cmd_experiment,
    "train-eval": cmd_train_eval,
    "bench": cmd_bench,
    "stats": cmd_stats,
}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            run = load_run_config(args.config)
        elif args.command == "stats":
            run = None
        else:
            run = RunConfig()
        return COMMANDS[args.command](args, run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
