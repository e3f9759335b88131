"""Discrete-time current-based LIF simulation with Loihi semantics.

Per step and neuron, in this order::

    I <- I * (4096 - dI)/4096 + multiplier * sum(w * spikes of the last step) + bias
    if refractory: counter -= 1, v stays 0
    else:          v <- v * (4096 - dv)/4096 + I + injection
    if v >= v_th:  spike, v <- 0, counter <- t_ref

All synapses have a delay of one step: spikes emitted at step ``t`` enter the
current at step ``t + 1``.  Arithmetic is float64.  Integer weights times the
multiplier are exact in float64, so the synaptic sums do not depend on
summation order and runs are bit-reproducible.  State values saturate at
``+-SATURATION``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .config import NeuronParams

SATURATION = 2.0 ** 40


@dataclass
class NeuronState:
    """Mutable state of a population.

    ``pending`` holds the spikes emitted in the previous step, i.e. the ones
    still in flight on the one-step synaptic pipeline.
    """

    v: np.ndarray
    current: np.ndarray
    refractory: np.ndarray
    pending: np.ndarray

    @classmethod
    def zeros(cls, n):
        return cls(
            v=np.zeros(n),
            current=np.zeros(n),
            refractory=np.zeros(n, dtype=np.int64),
            pending=np.zeros(n, dtype=bool),
        )

    @property
    def n(self):
        return self.v.size

    def copy(self):
        return NeuronState(self.v.copy(), self.current.copy(),
                           self.refractory.copy(), self.pending.copy())

    def snapshot(self):
        """``(n, 4)`` table of ``neuron, v, I, refractory`` for debugging dumps."""
        return np.column_stack([np.arange(self.n), self.v, self.current, self.refractory])


@dataclass(frozen=True)
class InjectionPlan:
    """External current injections as parallel ``(step, neuron, amount)`` arrays."""

    step: np.ndarray
    neuron: np.ndarray
    amount: np.ndarray

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))

    def __len__(self):
        return self.step.size

    def shifted(self, offset):
        return InjectionPlan(self.step + offset, self.neuron, self.amount)

    def __add__(self, other):
        return InjectionPlan(
            np.concatenate([self.step, other.step]),
            np.concatenate([self.neuron, other.neuron]),
            np.concatenate([self.amount, other.amount]),
        )

    def dense(self, horizon, n):
        """``(horizon, n)`` array of injected current; out-of-range steps raise."""
        if len(self) and (self.step.min() < 0 or self.step.max() >= horizon):
            raise ValueError("injection step outside the simulation horizon")
        out = np.zeros((horizon, n))
        np.add.at(out, (self.step, self.neuron), self.amount)
        return out


def inject_pulse(patch, step=0, amount=None, params: NeuronParams | None = None):
    """One-step injection into every neuron of ``patch``.

    The default amount is the firing threshold, which makes each target spike
    at ``step`` unless it is refractory.
    """
    patch = np.asarray(sorted(set(int(p) for p in np.ravel(patch))), dtype=np.int64)
    if amount is None:
        amount = (params or NeuronParams()).v_th
    return InjectionPlan(
        np.full(patch.size, step, dtype=np.int64), patch, np.full(patch.size, float(amount))
    )


class Simulator:
    """Steps one network instance.

    Parameters
    ----------
    weights : scipy.sparse matrix
        ``(post, pre)`` weight mantissas, e.g. ``Connectome.weight_matrix()``.
    params : NeuronParams
    """

    def __init__(self, weights, params: NeuronParams):
        self.params = params
        w = weights.tocsr() * float(params.weight_multiplier)
        # column-compressed transpose: rows are presynaptic neurons
        self._pre = w.T.tocsr()
        self._pre.sort_indices()
        self.n = w.shape[0]
        self.state = NeuronState.zeros(self.n)
        self._fi = params.current_factor
        self._fv = params.voltage_factor

    def synaptic_input(self, spikes):
        """Summed weighted input caused by a boolean spike vector."""
        idx = np.flatnonzero(spikes)
        out = np.zeros(self.n)
        if idx.size == 0:
            return out
        pre = self._pre
        starts, stops = pre.indptr[idx], pre.indptr[idx + 1]
        lengths = stops - starts
        total = lengths.sum()
        if total == 0:
            return out
        # gather the rows of all active presynaptic neurons in index order
        offsets = np.repeat(starts - np.cumsum(lengths) + lengths, lengths) + np.arange(total)
        return np.bincount(pre.indices[offsets], weights=pre.data[offsets], minlength=self.n)

    def step(self, injection=None):
        """Advance one step; returns the boolean spike vector emitted now."""
        p, s = self.params, self.state
        arriving = self.synaptic_input(s.pending)
        s.current *= self._fi
        s.current += arriving
        if p.bias:
            s.current += p.bias
        np.clip(s.current, -SATURATION, SATURATION, out=s.current)

        refr = s.refractory > 0
        s.v *= self._fv
        s.v += s.current
        if injection is not None:
            s.v += injection
        s.v[refr] = 0.0
        s.refractory[refr] -= 1
        np.clip(s.v, -SATURATION, SATURATION, out=s.v)

        spikes = s.v >= p.v_th
        s.v[spikes] = 0.0
        s.refractory[spikes] = p.t_ref
        s.pending = spikes
        return spikes

    def run(self, horizon, injections: InjectionPlan | None = None, record=None):
        """Simulate ``horizon`` steps from the current state.

        Parameters
        ----------
        horizon : int
        injections : InjectionPlan, optional
            Steps are relative to the start of this call.
        record : array-like of int, optional
            Neuron indices to keep in the raster (default: all).

        Returns
        -------
        ndarray of bool, shape ``(horizon, len(record))``
        """
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        cols = np.arange(self.n) if record is None else np.asarray(record, dtype=np.int64)
        raster = np.zeros((horizon, cols.size), dtype=bool)
        inj = _by_step(injections, horizon, self.n)
        for t in range(horizon):
            raster[t] = self.step(inj.get(t))[cols]
        return raster

    def reset(self):
        """Zero ``v``, ``I``, refractory counters and in-flight spikes."""
        self.state = reset_membranes(self.state)


def _by_step(plan, horizon, n):
    if plan is None or len(plan) == 0:
        return {}
    if plan.step.min() < 0 or plan.step.max() >= horizon:
        raise ValueError("injection step outside the simulation horizon")
    out = {}
    for t in np.unique(plan.step):
        sel = plan.step == t
        vec = np.zeros(n)
        np.add.at(vec, plan.neuron[sel], plan.amount[sel])
        out[int(t)] = vec
    return out


def reset_membranes(state: NeuronState) -> NeuronState:
    """All-zero state of the same size (pipeline cleared as well)."""
    return NeuronState.zeros(state.n)


def step(state: NeuronState, weights, params: NeuronParams, injection=None):
    """Functional single step: returns ``(new_state, spikes)``; ``state`` is untouched."""
    sim = Simulator(weights, params)
    sim.state = state.copy()
    spikes = sim.step(injection)
    return sim.state, spikes


def run(connectome, params: NeuronParams | None = None, injections=None, horizon=500,
        record=None):
    """Simulate a connectome from the zero state and return the spike raster."""
    params = params or connectome.config.neuron
    sim = Simulator(connectome.weight_matrix(), params)
    return sim.run(horizon, injections, record)


def save_raster_events(path, rasters, trial_offset=0):
    """Write spikes of a ``(trials, steps, neurons)`` or ``(steps, neurons)`` raster.

    Columns ``trial,step,neuron``, sorted in that order.
    """
    rasters = np.asarray(rasters, dtype=bool)
    if rasters.ndim == 2:
        rasters = rasters[None]
    tr, st, ne = np.nonzero(rasters)
    table = np.column_stack([tr + trial_offset, st, ne])
    np.savetxt(path, table, fmt="%d", delimiter=",", header="trial,step,neuron", comments="")


def load_raster_events(path, shape):
    """Inverse of :func:`save_raster_events`; ``shape`` is ``(trials, steps, neurons)``."""
    with warnings.catch_warnings():
        # a raster without spikes is a header-only file
        warnings.simplefilter("ignore", UserWarning)
        table = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    out = np.zeros(shape, dtype=bool)
    if table.size:
        out[table[:, 0], table[:, 1], table[:, 2]] = True
    return out
