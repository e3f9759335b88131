"""Leave-one-out trial protocol, inter-trial reset and sliding-window binning."""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, NeuronParams
from .neurocore import Simulator, inject_pulse, load_raster_events, save_raster_events

log = logging.getLogger(__name__)


def make_leave_one_out(patch):
    """The 25 input patterns of a 5x5 patch: pattern ``k`` omits neuron ``k``."""
    patch = np.asarray(patch, dtype=np.int64)
    return [np.delete(patch, k) for k in range(patch.size)]


@dataclass(frozen=True)
class TrialPlan:
    """Input patterns and timing of one experiment."""

    patterns: tuple
    record_steps: int = 215
    gap_steps: int = 30
    drop_head: int = 5
    bin_width: int = 10
    samples: int = 200

    def __post_init__(self):
        if self.record_steps < 1:
            raise ConfigError("record_steps", "must be >= 1")
        if self.gap_steps < 0:
            raise ConfigError("gap_steps", "must be >= 0")
        if self.record_steps < self.drop_head + self.bin_width + self.samples - 1:
            log.debug("plan records too few steps for %d binned samples", self.samples)

    @classmethod
    def leave_one_out(cls, patch, **kw):
        return cls(tuple(make_leave_one_out(patch)), **kw)

    @property
    def n_trials(self):
        return len(self.patterns)

    def to_dict(self):
        return {
            "patterns": [p.tolist() for p in self.patterns],
            "record_steps": self.record_steps,
            "gap_steps": self.gap_steps,
            "drop_head": self.drop_head,
            "bin_width": self.bin_width,
            "samples": self.samples,
        }


def bin_raster(raster, drop_head=5, bin_width=10, samples=200):
    """Sliding-window spike counts.

    Drops the first ``drop_head`` steps, then counts spikes in windows of
    ``bin_width`` steps at stride 1 and keeps the first ``samples`` windows.
    Works on any array whose second-to-last axis is time, e.g.
    ``(steps, units)`` or ``(trials, steps, units)``.
    """
    x = np.asarray(raster)
    steps = x.shape[-2]
    need = drop_head + bin_width + samples - 1
    if steps < need:
        raise ConfigError(
            "record_steps", f"raster has {steps} steps, binning needs at least {need}"
        )
    x = x[..., drop_head:, :].astype(np.int64)
    n_windows = x.shape[-2] - bin_width + 1
    if n_windows > samples:
        log.debug("discarding %d trailing windows", n_windows - samples)
    cs = np.cumsum(x, axis=-2)
    pad = np.zeros(cs.shape[:-2] + (1, cs.shape[-1]), dtype=np.int64)
    cs = np.concatenate([pad, cs], axis=-2)
    return cs[..., bin_width:bin_width + samples, :] - cs[..., :samples, :]


def pool_counts(binned_exc, pooling_map):
    """Diagnostic pooling: sum the binned counts of each pooling patch.

    ``binned_exc`` has excitatory units on its last axis.
    """
    return np.asarray(binned_exc)[..., np.asarray(pooling_map)].sum(axis=-1)


@dataclass
class TrialSet:
    """Rasters of all trials plus the binned features of one readout source.

    ``rasters`` is ``(trials, steps, neurons)`` over every neuron of the
    network (E, I, pooling).  ``binned`` holds the readout features:
    ``(trials, samples, 72)`` for ``pooling`` or ``(trials, samples, n_exc)``
    for ``excitatory``.
    """

    rasters: np.ndarray
    binned: np.ndarray
    readout_source: str
    plan: TrialPlan
    n_exc: int
    pool_slice: slice
    meta: dict = field(default_factory=dict)

    @property
    def exc(self):
        return self.rasters[:, :, : self.n_exc]

    @property
    def pool(self):
        return self.rasters[:, :, self.pool_slice]

    def features(self, source=None, pooling_map=None):
        """Binned features for ``source`` (``pooling``, ``excitatory`` or
        ``patch-count``; the last needs ``pooling_map``)."""
        source = source or self.readout_source
        p = self.plan
        kw = dict(drop_head=p.drop_head, bin_width=p.bin_width, samples=p.samples)
        if source == self.readout_source:
            return self.binned
        if source == "pooling":
            return bin_raster(self.pool, **kw)
        if source == "excitatory":
            return bin_raster(self.exc, **kw)
        if source == "patch-count":
            return pool_counts(bin_raster(self.exc, **kw), pooling_map)
        raise ValueError(f"unknown readout source {source!r}")


def run_trials(connectome, params: NeuronParams | None = None, plan: TrialPlan | None = None,
               readout="pooling", order=None) -> TrialSet:
    """Run the leave-one-out experiment on one network.

    Each trial starts from the zero state, receives a one-step pulse into its
    pattern at step 0, is recorded for ``plan.record_steps`` steps, and is
    followed by a membrane reset and ``plan.gap_steps`` silent steps.
    ``order`` permutes the execution order; results are always stored by
    trial index.
    """
    if readout not in ("pooling", "excitatory"):
        raise ConfigError("readout", f"unknown readout {readout!r}")
    params = params or connectome.config.neuron
    plan = plan or TrialPlan.leave_one_out(connectome.input_patch)
    sim = Simulator(connectome.weight_matrix(), params)
    n = connectome.n_neurons
    rasters = np.zeros((plan.n_trials, plan.record_steps, n), dtype=bool)
    order = range(plan.n_trials) if order is None else order
    for k in order:
        sim.reset()
        pulse = inject_pulse(plan.patterns[k], 0, params=params)
        rasters[k] = sim.run(plan.record_steps, pulse)
        sim.reset()
        if plan.gap_steps:
            sim.run(plan.gap_steps, record=[])
    ts = TrialSet(
        rasters=rasters,
        binned=np.zeros(0),
        readout_source=readout,
        plan=plan,
        n_exc=connectome.n_exc,
        pool_slice=connectome.pool_slice,
        meta={"config_digest": connectome.config.digest(), "seed": connectome.config.seed},
    )
    part = ts.pool if readout == "pooling" else ts.exc
    ts.binned = bin_raster(part, plan.drop_head, plan.bin_width, plan.samples)
    return ts


def save_trialset(ts: TrialSet, directory) -> dict:
    """Write ``events.csv``, ``binned.csv`` and ``manifest.json``.

    The binned file lists the nonzero ``trial,row,unit,count`` entries only.
    Returns the manifest.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_raster_events(d / "events.csv", ts.rasters)
    tr, row, unit = np.nonzero(ts.binned)
    table = np.column_stack([tr, row, unit, ts.binned[tr, row, unit]])
    np.savetxt(d / "binned.csv", table, fmt="%d", delimiter=",",
               header="trial,row,unit,count", comments="")
    manifest = {
        "plan": ts.plan.to_dict(),
        "readout_source": ts.readout_source,
        "shape": list(ts.rasters.shape),
        "binned_shape": list(ts.binned.shape),
        "n_exc": ts.n_exc,
        "pool_slice": [ts.pool_slice.start, ts.pool_slice.stop],
        **ts.meta,
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest


def load_trialset(directory) -> TrialSet:
    d = Path(directory)
    m = json.loads((d / "manifest.json").read_text())
    p = dict(m["plan"])
    plan = TrialPlan(tuple(np.array(x, dtype=np.int64) for x in p.pop("patterns")), **p)
    rasters = load_raster_events(d / "events.csv", tuple(m["shape"]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        table = np.loadtxt(d / "binned.csv", delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    binned = np.zeros(m["binned_shape"], dtype=np.int64)
    if table.size:
        binned[table[:, 0], table[:, 1], table[:, 2]] = table[:, 3]
    meta = {k: m[k] for k in ("config_digest", "seed") if k in m}
    return TrialSet(rasters, binned, m["readout_source"], plan, m["n_exc"],
                    slice(*m["pool_slice"]), meta)
