"""Synthetic 3D end-effector trajectories and CSV ingestion.

Each built-in action is a waypoint script: ``(time fraction, (x, y, z))``
pairs in metres.  Consecutive waypoints are joined by minimum-jerk segments
(zero velocity and acceleration at every waypoint), sampled at 200 points,
i.e. 2 s at 100 Hz.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

N_SAMPLES = 200
RATE_HZ = 100.0


@dataclass(frozen=True)
class Trajectory:
    name: str
    samples: np.ndarray  # (200, 3)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[1] != 3:
            raise ValueError("trajectory samples must be (n, 3)")
        if not np.isfinite(s).all():
            raise ValueError("trajectory contains non-finite values")
        object.__setattr__(self, "samples", s)

    @property
    def times(self):
        return np.arange(len(self.samples)) / RATE_HZ


@dataclass(frozen=True)
class WaypointScript:
    times: tuple
    points: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.size < 2 or t[0] != 0.0 or t[-1] != 1.0 or np.any(np.diff(t) <= 0):
            raise ValueError("waypoint times must increase strictly from 0 to 1")
        if np.asarray(self.points).shape != (t.size, 3):
            raise ValueError("need one 3D point per waypoint time")

    def bounds(self):
        p = np.asarray(self.points, dtype=float)
        return p.min(axis=0), p.max(axis=0)


def _script(*pairs):
    return WaypointScript(tuple(t for t, _ in pairs), tuple(tuple(p) for _, p in pairs))


# table height 0, home pose above the table; object at A, target at B
_HOME = (0.45, 0.00, 0.35)
_A = (0.55, -0.15, 0.05)
_B = (0.45, 0.20, 0.05)
_SHELF = (0.40, 0.25, 0.30)

SCRIPTS = {
    "hide": _script(
        (0.0, _HOME), (0.35, (0.55, -0.15, 0.20)), (0.55, _A),
        (0.75, (0.50, 0.05, 0.15)), (1.0, (0.35, 0.20, 0.08)),
    ),
    "unhide": _script(
        (0.0, (0.35, 0.20, 0.08)), (0.25, (0.50, 0.05, 0.15)), (0.45, _A),
        (0.65, (0.55, -0.15, 0.20)), (1.0, _HOME),
    ),
    "move_down": _script(
        (0.0, (0.50, 0.05, 0.40)), (0.5, (0.52, 0.03, 0.22)), (1.0, (0.55, 0.00, 0.05)),
    ),
    "move_up": _script(
        (0.0, (0.55, 0.00, 0.05)), (0.5, (0.52, 0.03, 0.22)), (1.0, (0.50, 0.05, 0.40)),
    ),
    "pick_and_place": _script(
        (0.0, (0.55, -0.15, 0.25)), (0.15, _A), (0.25, _A), (0.4, (0.55, -0.15, 0.25)),
        (0.65, (0.45, 0.20, 0.25)), (0.85, _B), (1.0, (0.45, 0.20, 0.25)),
    ),
    "put_on_top": _script(
        (0.0, _A), (0.25, (0.50, -0.05, 0.30)), (0.6, (0.42, 0.20, 0.40)),
        (0.85, _SHELF), (1.0, (0.40, 0.25, 0.36)),
    ),
    "take_down": _script(
        (0.0, (0.40, 0.25, 0.36)), (0.15, _SHELF), (0.4, (0.42, 0.20, 0.40)),
        (0.75, (0.50, -0.05, 0.30)), (1.0, _A),
    ),
}

NAMES = tuple(SCRIPTS)


def min_jerk(s):
    """Normalised minimum-jerk blend ``10 s^3 - 15 s^4 + 6 s^5`` on [0, 1]."""
    s = np.clip(s, 0.0, 1.0)
    return s ** 3 * (10.0 + s * (-15.0 + 6.0 * s))


def generate(name, script: WaypointScript | None = None, seed=None, jitter=0.0,
             n=N_SAMPLES) -> Trajectory:
    """Sample a waypoint script with minimum-jerk segments.

    ``jitter`` (metres) perturbs the interior waypoints with Gaussian noise
    drawn from ``seed``; the end points are never moved.
    """
    if script is None:
        if name not in SCRIPTS:
            raise KeyError(f"unknown trajectory {name!r}; choose from {', '.join(NAMES)}")
        script = SCRIPTS[name]
    t = np.asarray(script.times, dtype=float)
    p = np.array(script.points, dtype=float)
    if jitter > 0 and len(p) > 2:
        rng = np.random.default_rng(seed)
        p[1:-1] += jitter * rng.standard_normal(p[1:-1].shape)
    u = np.linspace(0.0, 1.0, n)
    seg = np.clip(np.searchsorted(t, u, side="right") - 1, 0, len(t) - 2)
    s = (u - t[seg]) / (t[seg + 1] - t[seg])
    b = min_jerk(s)[:, None]
    out = p[seg] + b * (p[seg + 1] - p[seg])
    return Trajectory(name, out)


def builtin(names=NAMES, seed=None, jitter=0.0):
    return [generate(nm, seed=seed, jitter=jitter) for nm in names]


def resample(times, values, n=N_SAMPLES):
    """Linear interpolation onto ``n`` uniform points spanning the time range."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    grid = np.linspace(times[0], times[-1], n)
    out = np.column_stack([np.interp(grid, times, values[:, j]) for j in range(values.shape[1])])
    out[0], out[-1] = values[0], values[-1]
    return grid, out


def load_csv(path, n=N_SAMPLES, name=None) -> Trajectory:
    """Read a ``t,x,y,z`` CSV (header required) and resample to ``n`` points."""
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "x", "y", "z"]:
            raise ValueError(f"{path}:1: expected header t,x,y,z")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric field in {row!r}") from None
            if len(rows) > 1 and rows[-1][0] <= rows[-2][0]:
                raise ValueError(f"{path}:{lineno}: time is not strictly increasing")
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least 2 data rows")
    data = np.array(rows)
    _, samples = resample(data[:, 0], data[:, 1:], n)
    return Trajectory(name or path.stem, samples)


def save_csv(path, samples, times=None):
    """Write ``t,x,y,z`` rows (``times`` default: 100 Hz from 0)."""
    samples = np.asarray(samples, dtype=float)
    if times is None:
        times = np.arange(len(samples)) / RATE_HZ
    table = np.column_stack([times, samples])
    np.savetxt(path, table, delimiter=",", header="t,x,y,z", comments="", fmt="%.10g")


@dataclass(frozen=True)
class Normalization:
    """Per-dimension affine map ``z = (x - mean) / scale``.

    Degenerate (constant) dimensions keep ``scale = 1``.
    """

    mean: np.ndarray
    scale: np.ndarray
    degenerate: np.ndarray

    def apply(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.scale

    def invert(self, z):
        return np.asarray(z, dtype=float) * self.scale + self.mean


def normalize(samples):
    """Z-score each column; returns ``(normalised, Normalization)``."""
    x = np.asarray(samples.samples if isinstance(samples, Trajectory) else samples, dtype=float)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    degenerate = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    scale = np.where(degenerate, 1.0, std)
    norm = Normalization(mean, scale, degenerate)
    return norm.apply(x), norm


def denormalize(z, norm: Normalization):
    return norm.invert(z)
