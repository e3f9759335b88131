"""Linear trajectory readouts: OLS, elastic net, smoothing and scoring.

Elastic-net objective, per output column, on standardised features ``Z``::

    1/(2n) ||y - b - Z w||^2 + alpha * (l1_ratio * ||w||_1 + (1 - l1_ratio)/2 * ||w||^2)

The intercept ``b`` is not penalised.  Coefficients are mapped back to the
raw feature scale after fitting.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import blas

log = logging.getLogger(__name__)


@dataclass
class ReadoutModel:
    """Affine map ``y = intercept + X @ weights``.

    ``weights`` is ``(features, outputs)``.  ``meta`` records how the model
    was obtained (method, rank, convergence).
    """

    intercept: np.ndarray
    weights: np.ndarray
    source: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.intercept = np.atleast_1d(np.asarray(self.intercept, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim == 1:
            self.weights = self.weights[:, None]
        if self.weights.shape[1] != self.intercept.size:
            raise ValueError("weights and intercept disagree on the output count")

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.weights.shape[0]:
            raise ValueError(
                f"model expects {self.weights.shape[0]} features, got {x.shape[-1]}"
            )
        return self.intercept + x @ self.weights

    def to_table(self):
        """Rows ``(feature, w_0, w_1, ...)``; feature -1 is the intercept."""
        idx = np.arange(-1, self.weights.shape[0])[:, None]
        return np.hstack([idx, np.vstack([self.intercept, self.weights])])


def _as_2d(y):
    y = np.asarray(y, dtype=float)
    return (y[:, None], True) if y.ndim == 1 else (y, False)


def fit_ols(x, y, source="", rcond=None) -> ReadoutModel:
    """Least squares with an intercept column (SVD based).

    A rank-deficient design yields the minimum-norm (pseudo-inverse)
    solution and ``meta['rank_deficient'] = True``.
    """
    x = np.asarray(x, dtype=float)
    y2, _ = _as_2d(y)
    if x.shape[0] != y2.shape[0]:
        raise ValueError("features and targets have different row counts")
    design = np.hstack([np.ones((x.shape[0], 1)), x])
    beta, _, rank, _ = np.linalg.lstsq(design, y2, rcond=rcond)
    meta = {"method": "ols", "rank": int(rank),
            "rank_deficient": bool(rank < design.shape[1])}
    if meta["rank_deficient"]:
        log.info("OLS design rank %d < %d columns", rank, design.shape[1])
    return ReadoutModel(beta[0], beta[1:], source, meta)


@dataclass(frozen=True)
class ElasticNetConfig:
    alpha: float = 0.001
    l1_ratio: float = 0.05
    max_iter: int = 1000
    tol: float = 1e-6

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not 0 <= self.l1_ratio <= 1:
            raise ValueError("l1_ratio must lie in [0, 1]")
        if self.max_iter < 1 or self.tol <= 0:
            raise ValueError("max_iter must be >= 1 and tol > 0")


def standardize(x):
    """Column means and scales; constant columns get scale 1 and are flagged."""
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    const = scale <= 1e-12 * np.maximum(1.0, np.abs(mean))
    scale = np.where(const, 1.0, scale)
    return mean, scale, const


def _soft(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def fit_elastic_net(x, y, cfg: ElasticNetConfig | None = None, source="",
                    warm_start=None) -> ReadoutModel:
    """Cyclic coordinate descent on standardised features.

    All output columns are solved together in one sweep (they share the
    Gram matrix) but their objectives are independent.  Converged when the
    largest violation of the optimality conditions (see :func:`kkt_residual`)
    after a sweep is at most ``cfg.tol``; otherwise the last iterate is
    returned with ``meta['converged'] = False``.
    """
    cfg = cfg or ElasticNetConfig()
    x = np.asarray(x, dtype=float)
    y2, _ = _as_2d(y)
    n, p = x.shape
    mean, scale, const = standardize(x)
    z = (x - mean) / scale
    z[:, const] = 0.0
    ymean = y2.mean(axis=0)
    yc = y2 - ymean

    gram = z.T @ z / n
    zy = z.T @ yc / n
    l1 = cfg.alpha * cfg.l1_ratio
    l2 = cfg.alpha * (1.0 - cfg.l1_ratio)
    diag = np.diag(gram).copy()
    denom = diag + l2
    active = (~const) & (denom > 0)

    k = y2.shape[1]
    w = np.zeros((k, p))
    if warm_start is not None:
        w[:] = (np.asarray(warm_start, dtype=float).reshape(p, k) * scale[:, None]).T
        w[:, ~active] = 0.0
    # grad = Z^T r / n, kept as (outputs, features) in Fortran order for dger
    grad = np.asfortranarray(zy.T - w @ gram)
    order = np.flatnonzero(active)
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        for j in order:
            wj = w[:, j]
            rho = grad[:, j] + diag[j] * wj
            new = _soft(rho, l1) / denom[j]
            delta = new - wj
            if np.any(delta):
                grad = blas.dger(-1.0, delta, gram[j], a=grad, overwrite_a=True)
                w[:, j] = new
        if kkt_residual(grad[:, active], w[:, active], l1, l2).max(initial=0.0) <= cfg.tol:
            converged = True
            break
    if not converged:
        log.warning("elastic net did not converge in %d sweeps", cfg.max_iter)

    w = w.T
    grad = np.ascontiguousarray(grad.T)
    weights = w / scale[:, None]
    intercept = ymean - mean @ weights
    meta = {
        "method": "elasticnet", "alpha": cfg.alpha, "l1_ratio": cfg.l1_ratio,
        "converged": converged, "n_iter": it,
        "kkt": float(kkt_residual(grad[active], w[active], l1, l2).max(initial=0.0)),
    }
    return ReadoutModel(intercept, weights, source, meta)


def kkt_residual(grad, w, l1, l2):
    """Per-coefficient violation of the elastic-net optimality conditions.

    ``grad`` is ``Z^T r / n`` at ``w`` (standardised scale).  For ``w = 0``
    the violation is ``max(|grad| - l1, 0)``, otherwise
    ``|grad - l2 w - l1 sign(w)|``.
    """
    g = grad - l2 * w
    return np.where(w == 0, np.maximum(np.abs(grad) - l1, 0.0), np.abs(g - l1 * np.sign(w)))


def elastic_net_objective(x, y, model: ReadoutModel, alpha, l1_ratio):
    """Objective value of ``model`` per output column, on standardised scale."""
    x = np.asarray(x, dtype=float)
    y2, _ = _as_2d(y)
    _, scale, _ = standardize(x)
    w = model.weights * scale[:, None]
    r = y2 - model.predict(x)
    n = x.shape[0]
    return (r ** 2).sum(axis=0) / (2 * n) + alpha * (
        l1_ratio * np.abs(w).sum(axis=0) + 0.5 * (1 - l1_ratio) * (w ** 2).sum(axis=0)
    )


# --------------------------------------------------------------------------
# smoothing and scoring


def savgol_coefficients(window, polyorder, pos=None):
    """Weights that evaluate the least-squares polynomial of ``polyorder``
    through ``window`` equally spaced points at offset ``pos`` (default: centre).
    """
    if window < 1 or polyorder >= window:
        raise ValueError("need polyorder < window")
    pos = (window - 1) / 2 if pos is None else pos
    t = np.arange(window, dtype=float) - pos
    vander = t[:, None] ** np.arange(polyorder + 1)
    # row 0 of the pseudo-inverse evaluates the fit at t = 0
    return np.linalg.pinv(vander)[0]


def savgol_smooth(series, window=21, polyorder=1, axis=0, mode="truncate"):
    """Savitzky-Golay smoothing.

    Interior points use the centred window.  Near the edges ``mode``
    ``"truncate"`` fits the polynomial on the part of the centred window
    that lies inside the series; ``"interp"`` fits it on the first or last
    ``window`` points and evaluates at the edge positions.
    """
    if window % 2 == 0 or window <= polyorder:
        raise ValueError("window must be odd and larger than polyorder")
    x = np.moveaxis(np.asarray(series, dtype=float), axis, 0)
    n = x.shape[0]
    if n < window:
        raise ValueError("series shorter than the window")
    half = window // 2
    out = np.empty_like(x)
    c = savgol_coefficients(window, polyorder)
    for i in range(half, n - half):
        out[i] = np.tensordot(c, x[i - half:i + half + 1], axes=(0, 0))
    for i in list(range(half)) + list(range(n - half, n)):
        if mode == "truncate":
            lo, hi = max(0, i - half), min(n, i + half + 1)
            order = min(polyorder, hi - lo - 1)
            w = savgol_coefficients(hi - lo, order, pos=i - lo)
        elif mode == "interp":
            lo = 0 if i < half else n - window
            hi = lo + window
            w = savgol_coefficients(window, polyorder, pos=i - lo)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        out[i] = np.tensordot(w, x[lo:hi], axes=(0, 0))
    return np.moveaxis(out, 0, axis)


def nrmse(prediction, target, per_dim=False):
    """RMSE divided by the target range, per column and averaged."""
    p = np.asarray(prediction, dtype=float)
    t = np.asarray(target, dtype=float)
    if p.shape != t.shape:
        raise ValueError("prediction and target shapes differ")
    if t.ndim == 1:
        p, t = p[:, None], t[:, None]
    rng = t.max(axis=0) - t.min(axis=0)
    if np.any(rng == 0):
        raise ValueError("target has a constant dimension; NRMSE undefined")
    e = np.sqrt(((p - t) ** 2).mean(axis=0)) / rng
    return e if per_dim else float(e.mean())


# --------------------------------------------------------------------------
# tasks


@dataclass(frozen=True)
class TaskSpec:
    """Which trials train the readout and which trial is predicted."""

    kind: str
    train_trials: tuple
    test_trial: int

    def __post_init__(self):
        train = set(self.train_trials)
        if self.kind == "representation" and self.test_trial not in train:
            raise ValueError("representation task must test on a training trial")
        if self.kind == "generalisation" and self.test_trial in train:
            raise ValueError("generalisation task must hold out the test trial")
        if self.kind not in ("representation", "generalisation"):
            raise ValueError(f"unknown task kind {self.kind!r}")

    @classmethod
    def representation(cls, test_trial, n_trials=25):
        return cls("representation", tuple(range(n_trials)), test_trial)

    @classmethod
    def generalisation(cls, test_trial, n_trials=25):
        train = tuple(k for k in range(n_trials) if k != test_trial)
        return cls("generalisation", train, test_trial)


@dataclass
class TaskResult:
    task: TaskSpec
    method: str
    nrmse_dims: np.ndarray
    prediction: np.ndarray
    smoothed: np.ndarray
    model: ReadoutModel

    @property
    def nrmse(self):
        return float(np.mean(self.nrmse_dims))


def fit_readout(features, targets, method="ols", enet: ElasticNetConfig | None = None,
                source=""):
    if method == "ols":
        return fit_ols(features, targets, source)
    if method == "elasticnet":
        return fit_elastic_net(features, targets, enet, source)
    raise ValueError(f"unknown method {method!r}")


def run_task(features, trajectory, task: TaskSpec, method="ols",
             enet: ElasticNetConfig | None = None, smooth=True, model=None) -> TaskResult:
    """Fit on the training trials, predict the test trial and score it.

    ``features`` is ``(trials, samples, units)``; ``trajectory`` is
    ``(samples, dims)`` and is the target of every trial.  Targets are
    z-scored for fitting and the prediction mapped back.  The score is the
    NRMSE of the smoothed prediction (raw if ``smooth`` is false).  A
    ``model`` fitted earlier on the same training trials can be passed in.
    """
    f = np.asarray(features, dtype=float)
    y = np.asarray(trajectory, dtype=float)
    mu, sd = y.mean(axis=0), y.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    if model is None:
        train = list(task.train_trials)
        xs = f[train].reshape(-1, f.shape[-1])
        ys = np.tile((y - mu) / sd, (len(train), 1))
        model = fit_readout(xs, ys, method, enet)
    pred = model.predict(f[task.test_trial]) * sd + mu
    sm = savgol_smooth(pred) if smooth else pred
    return TaskResult(task, method, nrmse(sm, y, per_dim=True), pred, sm, model)
