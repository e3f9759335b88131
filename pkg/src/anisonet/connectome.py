"""Network construction on the torus.

Neuron numbering is global: excitatory neurons ``0 .. n_exc-1`` (row-major on
the ``exc_side x exc_side`` sheet), then inhibitory neurons, then the 72
pooling neurons.  Positions are ``(row, col)``; inhibitory neuron ``(i, j)``
sits at ``(2i + 1, 2j + 1)`` in the excitatory frame.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from .config import ConfigError, GridSpec, NetworkConfig

# unit shifts ordered by angle, so neighbouring noise bins give neighbouring directions
DIRECTIONS = np.array(
    [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)],
    dtype=np.int64,
)


def torus_distance(a, b, side):
    """Euclidean distance on a ``side x side`` torus.

    Works elementwise on arrays of coordinates with a trailing axis of 2.
    """
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    d = np.minimum(d, side - d)
    return np.sqrt((d ** 2).sum(axis=-1))


def torus_displacement(a, b, side):
    """Signed minimal-image displacement ``b - a`` per axis, in ``[-side/2, side/2)``."""
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    return (d + side / 2) % side - side / 2


def grid_coords(side):
    """``(side**2, 2)`` array of ``(row, col)`` for row-major indices."""
    idx = np.arange(side * side)
    return np.stack([idx // side, idx % side], axis=1)


# ---------------------------------------------------------------------------
# Perlin landscape


def perlin_noise(side, cells, rng):
    """Periodic 2D gradient noise sampled at the integer points of a torus.

    ``cells`` noise cells per axis; gradients live on a ``cells x cells``
    lattice that wraps, so the field is periodic with period ``side``.
    Sample points are offset by half a grid unit to stay off lattice corners.
    Returns a ``(side, side)`` array.
    """
    angles = rng.uniform(0.0, 2.0 * np.pi, size=(cells, cells))
    grad = np.stack([np.cos(angles), np.sin(angles)], axis=-1)

    u = (np.arange(side) + 0.5) * cells / side
    i0 = np.floor(u).astype(int)
    f = u - i0
    i0 %= cells
    i1 = (i0 + 1) % cells

    def fade(t):
        return t * t * t * (t * (t * 6 - 15) + 10)

    fr, fc = np.meshgrid(f, f, indexing="ij")
    r0, c0 = np.meshgrid(i0, i0, indexing="ij")
    r1, c1 = np.meshgrid(i1, i1, indexing="ij")

    def corner(ri, ci, dr, dc):
        g = grad[ri, ci]
        return g[..., 0] * dr + g[..., 1] * dc

    n00 = corner(r0, c0, fr, fc)
    n10 = corner(r1, c0, fr - 1, fc)
    n01 = corner(r0, c1, fr, fc - 1)
    n11 = corner(r1, c1, fr - 1, fc - 1)
    wr, wc = fade(fr), fade(fc)
    top = n00 + wc * (n01 - n00)
    bottom = n10 + wc * (n11 - n10)
    return top + wr * (bottom - top)


@dataclass(frozen=True)
class DirectionLandscape:
    """Preferred shift direction of every excitatory neuron.

    ``direction[k]`` is one of the eight lattice steps in :data:`DIRECTIONS`.
    """

    side: int
    direction: np.ndarray
    scale: int
    seed: int

    @property
    def bins(self):
        """Index into :data:`DIRECTIONS` per neuron."""
        lookup = {tuple(d): i for i, d in enumerate(DIRECTIONS)}
        return np.array([lookup[tuple(d)] for d in self.direction])


def build_landscape(grid: GridSpec, scale=4, seed=0) -> DirectionLandscape:
    """Quantised Perlin direction field on the excitatory sheet.

    The noise values are rank-uniformised over all neurons (ordinal ranks,
    stable sort) and cut into eight equal-count bins that map to the eight
    lattice directions in angular order.
    """
    if scale < 1:
        raise ConfigError("perlin_scale", "must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5E1]))
    values = perlin_noise(grid.exc_side, scale, rng).ravel()
    ranks = np.empty(values.size, dtype=np.int64)
    ranks[np.argsort(values, kind="stable")] = np.arange(values.size)
    bins = ranks * len(DIRECTIONS) // values.size
    return DirectionLandscape(grid.exc_side, DIRECTIONS[bins].copy(), scale, seed)


def uniform_landscape(grid: GridSpec, direction=(0, 1)) -> DirectionLandscape:
    """Landscape with one shared direction; useful for checks."""
    d = np.tile(np.asarray(direction, dtype=np.int64), (grid.n_exc, 1))
    return DirectionLandscape(grid.exc_side, d, 0, -1)


# ---------------------------------------------------------------------------
# connectivity


@dataclass(frozen=True)
class Connectome:
    """Directed weighted graph over E, I and pooling neurons.

    Edge arrays are parallel and sorted by (source, target).  Weights are
    signed integer mantissas; every delay is one step.
    """

    config: NetworkConfig
    source: np.ndarray
    target: np.ndarray
    weight: np.ndarray
    delay: np.ndarray
    input_patch: np.ndarray
    pooling_map: np.ndarray
    landscape: DirectionLandscape | None = None
    _matrix: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_exc(self):
        return self.config.grid.n_exc

    @property
    def n_inh(self):
        return self.config.grid.n_inh

    @property
    def n_pool(self):
        return len(self.pooling_map)

    @property
    def n_neurons(self):
        return self.n_exc + self.n_inh + self.n_pool

    @property
    def pool_slice(self):
        return slice(self.n_exc + self.n_inh, self.n_neurons)

    def weight_matrix(self):
        """Sparse ``(post, pre)`` CSR matrix of weights, cached."""
        if "w" not in self._matrix:
            n = self.n_neurons
            m = sparse.csr_matrix(
                (self.weight.astype(np.float64), (self.target, self.source)),
                shape=(n, n),
            )
            m.sum_duplicates()
            m.sort_indices()
            self._matrix["w"] = m
        return self._matrix["w"]

    def out_degrees(self, population):
        """Per-source counts of targets in ``population`` ('exc', 'inh' or 'pool')."""
        lo, hi = self._range(population)
        mask = (self.target >= lo) & (self.target < hi)
        return np.bincount(self.source[mask], minlength=self.n_neurons)

    def _range(self, population):
        return {
            "exc": (0, self.n_exc),
            "inh": (self.n_exc, self.n_exc + self.n_inh),
            "pool": (self.n_exc + self.n_inh, self.n_neurons),
        }[population]

    def edges_between(self, pre, post):
        """Boolean mask of edges from population ``pre`` to ``post``."""
        a0, a1 = self._range(pre)
        b0, b1 = self._range(post)
        return (
            (self.source >= a0) & (self.source < a1)
            & (self.target >= b0) & (self.target < b1)
        )

    def without_recurrence(self):
        """Copy keeping only the pooling edges (for pipeline checks)."""
        keep = self.edges_between("exc", "pool")
        return Connectome(
            self.config, self.source[keep], self.target[keep], self.weight[keep],
            self.delay[keep], self.input_patch, self.pooling_map, self.landscape,
        )

    def positions(self):
        """Excitatory-frame positions of all E and I neurons."""
        g = self.config.grid
        return np.concatenate([grid_coords(g.exc_side), 2 * grid_coords(g.inh_side) + 1])


def _first_k_unique(cand, self_idx, k):
    """Per row, the first ``k`` distinct entries of ``cand`` that differ from ``self_idx``.

    Returns ``(chosen, ok)``: ``chosen`` is ``(rows, k)`` (garbage where not
    ``ok``), ``ok`` flags rows that had enough valid candidates.
    """
    rows, m = cand.shape
    order = np.argsort(cand, axis=1, kind="stable")
    srt = np.take_along_axis(cand, order, axis=1)
    first_sorted = np.ones_like(srt, dtype=bool)
    first_sorted[:, 1:] = srt[:, 1:] != srt[:, :-1]
    first = np.empty_like(first_sorted)
    np.put_along_axis(first, order, first_sorted, axis=1)
    valid = first & (cand != self_idx[:, None])
    rank = np.cumsum(valid, axis=1)
    ok = rank[:, -1] >= k
    pick = valid & (rank <= k)
    chosen = np.zeros((rows, k), dtype=cand.dtype)
    r_idx, c_idx = np.nonzero(pick[ok])
    chosen_ok = cand[ok][r_idx, c_idx].reshape(-1, k)
    chosen[ok] = chosen_ok
    return chosen, ok


def _sample(draw, self_idx, k, rng, max_rounds=40):
    """Rejection sampling of ``k`` distinct non-self targets per source.

    ``draw(rows, m, rng)`` returns an ``(len(rows), m)`` array of candidate
    target indices for the given source rows.  Rows that run short get a
    fresh batch appended to their candidates and are re-scanned.
    """
    n = len(self_idx)
    out = np.zeros((n, k), dtype=np.int64)
    if k == 0 or n == 0:
        return out
    m = int(1.5 * k) + 16
    rows = np.arange(n)
    cand = draw(rows, m, rng)
    for _ in range(max_rounds):
        chosen, ok = _first_k_unique(cand, self_idx[rows], k)
        out[rows[ok]] = chosen[ok]
        rows, cand = rows[~ok], cand[~ok]
        if rows.size == 0:
            return out
        cand = np.concatenate([cand, draw(rows, m, rng)], axis=1)
    raise ConfigError(
        "sigma", f"cannot reach out-degree {k} for {rows.size} sources; sigma too small"
    )


def _radial_draw(centers, sigma, to_index):
    """Candidate generator: radial-normal offsets around ``centers``.

    The offset length is ``sigma * z`` (``z`` standard normal) pushed one
    unit away from zero, the angle is uniform.  The resulting profile is
    isotropic and peaked at the centre; ``sigma`` is in the units of the
    coordinate frame of ``centers``.
    """
    def draw(rows, m, rng):
        phi = rng.uniform(-np.pi, np.pi, size=(rows.size, m))
        r = sigma * rng.standard_normal((rows.size, m))
        r += np.sign(r)
        off = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)
        return to_index(centers[rows][:, None, :] + off)
    return draw


def _gaussian_draw(centers, sigma, to_index):
    """Candidate generator: 2D isotropic Gaussian offsets (per-axis ``sigma``)."""
    def draw(rows, m, rng):
        off = rng.standard_normal((rows.size, m, 2)) * sigma
        return to_index(centers[rows][:, None, :] + off)
    return draw


PROFILES = {"radial": _radial_draw, "gaussian": _gaussian_draw}


def _to_grid(side, offset=0):
    def f(pos):
        rc = np.rint(pos).astype(np.int64) % side
        return offset + rc[..., 0] * side + rc[..., 1]
    return f


def _assemble(cfg, blocks, landscape):
    src = np.concatenate([b[0] for b in blocks])
    tgt = np.concatenate([b[1] for b in blocks])
    w = np.concatenate([b[2] for b in blocks])
    order = np.lexsort((tgt, src))
    src, tgt, w = src[order], tgt[order], w[order]
    return Connectome(
        config=cfg,
        source=src,
        target=tgt,
        weight=w,
        delay=np.ones_like(src),
        input_patch=select_input_patch(cfg.grid, cfg.input_origin, cfg.input_size),
        pooling_map=build_pooling(cfg.grid, cfg.pool_window).pooling_map,
        landscape=landscape,
    )


def _edge_block(sources, targets, weight):
    k = targets.shape[1]
    return (
        np.repeat(sources, k),
        targets.ravel(),
        np.full(sources.size * k, weight, dtype=np.int64),
    )


def build_anisotropic(cfg: NetworkConfig, landscape: DirectionLandscape | None = None,
                      seed: int | None = None) -> Connectome:
    """Locally connected EI network with shifted E->E projection profiles.

    Every source draws exactly ``p_conn * n_exc`` excitatory and
    ``p_conn * n_inh`` inhibitory targets from an isotropic profile around its
    position (width ``sigma_exc`` for E sources, ``sigma_inh`` for I
    sources).  For E->E edges the profile centre is moved ``n_shift`` steps
    along the source's landscape direction.  Continuous offsets are rounded
    to the nearest grid point; self and duplicate hits are redrawn.  Pooling
    edges are appended.
    """
    g = cfg.grid
    seed = cfg.seed if seed is None else seed
    if landscape is None:
        landscape = build_landscape(g, cfg.perlin_scale, seed)
    ss = np.random.SeedSequence([seed, 0xA415])
    rngs = [np.random.default_rng(s) for s in ss.spawn(4)]
    profile = PROFILES[cfg.profile]

    pos_e = grid_coords(g.exc_side).astype(float)
    pos_i = 2.0 * grid_coords(g.inh_side) + 1.0
    ids_e = np.arange(g.n_exc)
    ids_i = g.n_exc + np.arange(g.n_inh)
    none_e = np.full(g.n_exc, -1)
    none_i = np.full(g.n_inh, -1)
    k_e, k_i = cfg.exc_out_degree, cfg.inh_out_degree

    # everything is drawn in the frame of the target grid
    ratio = g.exc_side / g.inh_side
    to_e = _to_grid(g.exc_side)
    to_i = _to_grid(g.inh_side, g.n_exc)
    e_in_i = (pos_e - 1.0) / ratio
    i_in_i = grid_coords(g.inh_side).astype(float)
    if cfg.sigma_units == "target":
        s_ei, s_ii = cfg.sigma_exc, cfg.sigma_inh
    else:
        s_ei, s_ii = cfg.sigma_exc / ratio, cfg.sigma_inh / ratio

    shifted = pos_e + cfg.n_shift * landscape.direction
    ee = _sample(profile(shifted, cfg.sigma_exc, to_e), ids_e, k_e, rngs[0])
    ei = _sample(profile(e_in_i, s_ei, to_i), none_e, k_i, rngs[1])
    ie = _sample(profile(pos_i, cfg.sigma_inh, to_e), none_i, k_e, rngs[2])
    ii = _sample(profile(i_in_i, s_ii, to_i), ids_i, k_i, rngs[3])

    blocks = [
        _edge_block(ids_e, ee, cfg.j_exc),
        _edge_block(ids_e, ei, cfg.j_exc),
        _edge_block(ids_i, ie, -cfg.j_inh),
        _edge_block(ids_i, ii, -cfg.j_inh),
        _pool_block(cfg),
    ]
    return _assemble(cfg, blocks, landscape)


def build_random_control(cfg: NetworkConfig, seed: int | None = None) -> Connectome:
    """Size- and degree-matched network with uniformly drawn targets."""
    g = cfg.grid
    seed = cfg.seed if seed is None else seed
    ss = np.random.SeedSequence([seed, 0x7A4D])
    rngs = [np.random.default_rng(s) for s in ss.spawn(4)]
    ids_e = np.arange(g.n_exc)
    ids_i = g.n_exc + np.arange(g.n_inh)
    none_e = np.full(g.n_exc, -1)
    none_i = np.full(g.n_inh, -1)

    def uniform(lo, n):
        return lambda rows, m, rng: lo + rng.integers(0, n, size=(rows.size, m))

    k_e, k_i = cfg.exc_out_degree, cfg.inh_out_degree
    ee = _sample(uniform(0, g.n_exc), ids_e, k_e, rngs[0])
    ei = _sample(uniform(g.n_exc, g.n_inh), none_e, k_i, rngs[1])
    ie = _sample(uniform(0, g.n_exc), none_i, k_e, rngs[2])
    ii = _sample(uniform(g.n_exc, g.n_inh), ids_i, k_i, rngs[3])
    blocks = [
        _edge_block(ids_e, ee, cfg.j_exc),
        _edge_block(ids_e, ei, cfg.j_exc),
        _edge_block(ids_i, ie, -cfg.j_inh),
        _edge_block(ids_i, ii, -cfg.j_inh),
        _pool_block(cfg),
    ]
    return _assemble(cfg, blocks, None)


def build_network(cfg: NetworkConfig) -> Connectome:
    """Dispatch on ``cfg.kind``."""
    if cfg.kind == "anisotropic":
        return build_anisotropic(cfg)
    return build_random_control(cfg)


# ---------------------------------------------------------------------------
# pooling and input


@dataclass(frozen=True)
class PoolingLayout:
    """Two interleaved tilings of square windows over the excitatory sheet.

    ``origins[g]`` holds the ``(row, col)`` corners of grid ``g`` as a
    ``(n, n, 2)`` array; ``pooling_map[p]`` lists the excitatory sources of
    pooling neuron ``p`` (grid 0 first, row-major).
    """

    origins: np.ndarray
    window: int
    stride: int
    pooling_map: np.ndarray


def build_pooling(grid: GridSpec, window=10) -> PoolingLayout:
    side = grid.exc_side
    if side % window:
        raise ConfigError("pool_window", "exc_side must be divisible by the window")
    per_axis = side // window
    stride = window // 2
    base = np.arange(per_axis) * window
    origins = []
    patches = []
    for offset in (0, stride):
        o = np.stack(np.meshgrid(base + offset, base + offset, indexing="ij"), axis=-1)
        origins.append(o)
        for r0, c0 in o.reshape(-1, 2):
            patches.append(_block(side, (r0, c0), window))
    return PoolingLayout(np.stack(origins), window, stride, np.array(patches))


def _block(side, origin, size):
    r = (origin[0] + np.arange(size)) % side
    c = (origin[1] + np.arange(size)) % side
    return (r[:, None] * side + c[None, :]).ravel()


def _pool_block(cfg):
    pmap = build_pooling(cfg.grid, cfg.pool_window).pooling_map
    offset = cfg.grid.n_exc + cfg.grid.n_inh
    post = offset + np.repeat(np.arange(len(pmap)), pmap.shape[1])
    return pmap.ravel(), post, np.full(post.size, cfg.pool_weight, dtype=np.int64)


def select_input_patch(grid: GridSpec, origin=(20, 20), size=5) -> np.ndarray:
    """Excitatory indices of the ``size x size`` block at ``origin`` (wrapping)."""
    return _block(grid.exc_side, origin, size)


# ---------------------------------------------------------------------------
# files


def save_connectome(conn: Connectome, path) -> None:
    """Write the edge list as CSV with a one-line JSON metadata header.

    The header line is ``# {...}`` with the full network config, the input
    patch and the pooling map; the columns are ``source,target,weight,delay``.
    """
    meta = {
        "config": conn.config.to_dict(),
        "input_patch": conn.input_patch.tolist(),
        "pooling_map": conn.pooling_map.tolist(),
        "n_neurons": conn.n_neurons,
    }
    path = Path(path)
    with path.open("w") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write("source,target,weight,delay\n")
        table = np.column_stack([conn.source, conn.target, conn.weight, conn.delay])
        np.savetxt(fh, table, fmt="%d", delimiter=",")


def load_connectome(path, landscape: DirectionLandscape | None = None) -> Connectome:
    with Path(path).open() as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path}: missing metadata header")
        meta = json.loads(first[2:])
        header = fh.readline().strip()
        if header != "source,target,weight,delay":
            raise ValueError(f"{path}: unexpected columns {header!r}")
        table = np.loadtxt(fh, delimiter=",", dtype=np.int64, ndmin=2)
    cfg = NetworkConfig.from_dict(meta["config"])
    if table.size == 0:
        table = np.zeros((0, 4), dtype=np.int64)
    return Connectome(
        config=cfg,
        source=table[:, 0], target=table[:, 1], weight=table[:, 2], delay=table[:, 3],
        input_patch=np.array(meta["input_patch"], dtype=np.int64),
        pooling_map=np.array(meta["pooling_map"], dtype=np.int64),
        landscape=landscape,
    )


def save_landscape(landscape: DirectionLandscape, path) -> None:
    """Rows ``neuron,dx,dy`` where ``(dx, dy)`` is the (row, col) step."""
    table = np.column_stack([np.arange(len(landscape.direction)), landscape.direction])
    np.savetxt(path, table, fmt="%d", delimiter=",", header="neuron,dx,dy", comments="")


def load_landscape(path, scale=0, seed=-1) -> DirectionLandscape:
    table = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    side = int(round(np.sqrt(len(table))))
    order = np.argsort(table[:, 0])
    return DirectionLandscape(side, table[order, 1:3].copy(), scale, seed)
