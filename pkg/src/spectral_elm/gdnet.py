"""Fully connected tanh network trained by full-batch gradient descent, and the
empirical neural tangent kernel used to explain its spectral bias.

Parameters are flattened layer by layer, weights (row-major) before biases;
Jacobian columns in :func:`ntk_matrix` follow the same order.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from .datagen import Dataset
from .linops import ShapeError
from .spectral import DEFAULT_THRESHOLD, max_exact_frequency, project_sines, relative_l2_error

DEFAULT_NTK_BUDGET = 64_000_000  # Jacobian entries (512 MB at float64)


class DivergenceError(RuntimeError):
    def __init__(self, iteration: int, mse: float):
        super().__init__(f"training diverged at iteration {iteration} (mse={mse:.3e})")
        self.iteration = iteration
        self.mse = mse


@dataclass(frozen=True)
class MLPConfig:
    layer_sizes: tuple[int, ...] = (1, 100, 100, 1)
    activation: str = "tanh"
    learning_rate: float = 1e-3
    max_iters: int = 50_000
    snapshot_every: int = 1000
    seed: int = 0
    threshold: float = DEFAULT_THRESHOLD
    check_every: int = 10
    zero_output_init: bool = False

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError(f"layer_sizes needs at least two positive entries, got {self.layer_sizes}")
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if not self.learning_rate >= 0:
            raise ValueError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if self.max_iters < 0 or self.snapshot_every < 1 or self.check_every < 1:
            raise ValueError("max_iters, snapshot_every and check_every must be positive")


@dataclass(eq=False)
class MLPParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flatten(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    def unflatten(self, vec) -> "MLPParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.count:
            raise ShapeError(f"expected {self.count} parameters, got {vec.size}")
        ws, bs, pos = [], [], 0
        for w, b in zip(self.weights, self.biases):
            ws.append(vec[pos:pos + w.size].reshape(w.shape).copy())
            pos += w.size
            bs.append(vec[pos:pos + b.size].copy())
            pos += b.size
        return MLPParams(ws, bs)

    def copy(self) -> "MLPParams":
        return MLPParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def step(self, grad: "MLPParams", lr: float) -> None:
        for w, b, gw, gb in zip(self.weights, self.biases, grad.weights, grad.biases):
            w -= lr * gw
            b -= lr * gb


def init_params(config: MLPConfig) -> MLPParams:
    """Gaussian weights with variance ``1 / fan_in``, zero biases."""
    rng = np.random.default_rng(config.seed)
    ws, bs = [], []
    sizes = config.layer_sizes
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        ws.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    if config.zero_output_init:
        ws[-1][:] = 0.0
    return MLPParams(ws, bs)


def _inputs(params: MLPParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    n_in = params.weights[0].shape[1]
    if x.ndim == 1:
        x = x[:, None] if n_in == 1 else x[None, :]
    if x.ndim != 2 or x.shape[1] != n_in:
        raise ShapeError(f"expected inputs with {n_in} column(s), got shape {x.shape}")
    return x


def _forward_cache(params: MLPParams, x) -> list[np.ndarray]:
    a = _inputs(params, x)
    acts = [a]
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        a = z if i == last else np.tanh(z)
        acts.append(a)
    return acts


def forward(params: MLPParams, x) -> np.ndarray:
    """Network outputs, shape ``(n_samples, n_out)``; the last layer is affine."""
    return _forward_cache(params, x)[-1]


def _backward(params: MLPParams, acts: list[np.ndarray], delta: np.ndarray) -> MLPParams:
    n = len(params.weights)
    gws, gbs = [None] * n, [None] * n
    for i in range(n - 1, -1, -1):
        a = acts[i]
        gws[i] = delta.T @ a
        gbs[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i]) * (1.0 - a * a)
    return MLPParams(gws, gbs)


def _targets(y, n: int, n_out: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.size != n * n_out:
        raise ShapeError(f"expected {n * n_out} target values, got {y.size}")
    return y.reshape(n, n_out)


def mse_loss(params: MLPParams, x, y) -> float:
    out = forward(params, x)
    r = out - _targets(y, *out.shape)
    return float(np.sum(r * r) / out.shape[0])


def grad_mse(params: MLPParams, x, y) -> MLPParams:
    """Gradient of ``(1/N) * sum_j ||f(x_j) - y_j||^2`` by reverse-mode accumulation."""
    acts = _forward_cache(params, x)
    out = acts[-1]
    r = out - _targets(y, *out.shape)
    return _backward(params, acts, (2.0 / out.shape[0]) * r)


@dataclass(eq=False)
class TrainTrace:
    mse_per_iter: np.ndarray
    residual_snapshots: list[tuple[int, np.ndarray]]
    converged_at: int | None = None
    params: MLPParams | None = None
    # (iteration, predictions on eval_x) recorded alongside residual snapshots
    eval_snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "mse"])
        for i, m in enumerate(self.mse_per_iter):
            w.writerow([i, repr(float(m))])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "mse_per_iter": self.mse_per_iter.tolist(),
            "converged_at": self.converged_at,
            "residual_snapshots": [{"iter": it, "residual": r.tolist()} for it, r in self.residual_snapshots],
        })


def train_full_batch(config: MLPConfig, train: Dataset, test: Dataset | None = None, *,
                     eval_x=None, stop_at_convergence: bool = True,
                     params: MLPParams | None = None) -> TrainTrace:
    """Plain gradient descent on the full training set.

    Convergence means the relative L2 error on ``test`` drops below
    ``config.threshold``; it is checked every ``config.check_every`` iterations.
    """
    params = init_params(config) if params is None else params.copy()
    x, y = train.x, np.asarray(train.y)
    n = len(train)
    mses = np.empty(config.max_iters + 1)
    snaps, evals = [], []
    converged = None
    last = config.max_iters
    for it in range(config.max_iters + 1):
        acts = _forward_cache(params, x)
        out = acts[-1][:, 0]
        r = out - y
        mse = float(r @ r / n)
        mses[it] = mse
        if not np.isfinite(mse) or mse > 1e6:
            raise DivergenceError(it, mse)
        if it % config.snapshot_every == 0:
            snaps.append((it, r.copy()))
            if eval_x is not None:
                evals.append((it, forward(params, eval_x)[:, 0]))
        if test is not None and converged is None and it % config.check_every == 0:
            err = relative_l2_error(forward(params, test.x)[:, 0], test.y)
            if err < config.threshold:
                converged = it
                if stop_at_convergence:
                    last = it
                    break
        if it == config.max_iters:
            break
        params.step(_backward(params, acts, (2.0 / n) * r[:, None]), config.learning_rate)
    return TrainTrace(mse_per_iter=mses[:last + 1], residual_snapshots=snaps, converged_at=converged,
                      params=params, eval_snapshots=evals)


def jacobian(params: MLPParams, x, budget: int = DEFAULT_NTK_BUDGET) -> np.ndarray:
    """Per-sample parameter gradients of a scalar-output network, shape ``(N, P)``."""
    if params.layer_sizes[-1] != 1:
        raise ShapeError("the tangent kernel is defined here for scalar-output networks only")
    x = _inputs(params, x)
    n, p = x.shape[0], params.count
    if n * p > budget:
        raise MemoryError(f"Jacobian of {n}x{p} exceeds the budget of {budget} entries")
    acts = _forward_cache(params, x)
    delta = np.ones((n, 1))
    blocks = [None] * len(params.weights)
    for i in range(len(params.weights) - 1, -1, -1):
        a = acts[i]
        gw = (delta[:, :, None] * a[:, None, :]).reshape(n, -1)
        blocks[i] = np.hstack([gw, delta])
        if i > 0:
            delta = (delta @ params.weights[i]) * (1.0 - a * a)
    return np.hstack(blocks)


def ntk_matrix(params: MLPParams, x, budget: int = DEFAULT_NTK_BUDGET) -> np.ndarray:
    """Empirical tangent kernel ``K[i, j] = <df(x_i)/dtheta, df(x_j)/dtheta>``."""
    j = jacobian(params, x, budget)
    k = j @ j.T
    return 0.5 * (k + k.T)


def eigendecomp_sym(k, tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvectors (columns) and eigenvalues of a symmetric matrix, largest first."""
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {k.shape}")
    scale = max(np.abs(k).max(), np.finfo(np.float64).tiny)
    asym = np.abs(k - k.T).max() / scale
    if asym > tol:
        raise ValueError(f"matrix is not symmetric (relative asymmetry {asym:.2e})")
    lam, q = np.linalg.eigh(0.5 * (k + k.T))
    order = np.argsort(lam, kind="stable")[::-1]
    return q[:, order], lam[order]


def projected_error_trace(q, trace: TrainTrace) -> tuple[np.ndarray, np.ndarray]:
    """``|q_i . residual(t)|`` for each column ``q_i``; returns (iterations, curves[mode, snapshot])."""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim == 1:
        q = q[:, None]
    if not trace.residual_snapshots:
        raise ValueError("trace has no residual snapshots")
    iters = np.array([it for it, _ in trace.residual_snapshots])
    r = np.stack([res for _, res in trace.residual_snapshots], axis=1)
    if r.shape[0] != q.shape[0]:
        raise ShapeError(f"eigenvectors have length {q.shape[0]} but residuals {r.shape[0]}")
    return iters, np.abs(q.T @ r)


def fit_decay_rates(iters, curves, drop: float = 1e-2) -> np.ndarray:
    """Exponential rate per curve from a log-linear fit.

    Each fit uses the leading run of samples above ``drop`` times the initial
    value, so the floor reached by fast modes does not flatten their slope.
    """
    iters = np.asarray(iters, dtype=np.float64)
    curves = np.atleast_2d(np.asarray(curves, dtype=np.float64))
    rates = np.zeros(curves.shape[0])
    for i, c in enumerate(curves):
        if c[0] <= 0:
            continue
        above = c > drop * c[0]
        n = int(np.argmin(above)) if not above.all() else c.size
        n = max(n, 2)
        slope = np.polyfit(iters[:n], np.log(np.maximum(c[:n], np.finfo(np.float64).tiny)), 1)[0]
        rates[i] = -slope
    return rates


def dominant_frequency(q_i, grid, k_max: int | None = None) -> int:
    """Integer frequency carrying the most sine-plus-cosine energy of ``q_i``."""
    q_i = np.asarray(q_i, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    if q_i.shape != grid.shape:
        raise ShapeError(f"vector of length {q_i.size} does not match grid of {grid.size}")
    spec = project_sines(q_i, grid, k_max if k_max is not None else max_exact_frequency(grid.size))
    # a_0 is normalised to the mean, so rescale it to the same energy convention as k >= 1
    energy = spec.a**2 + spec.b**2
    energy[0] = 2.0 * spec.a[0] ** 2
    return int(np.argmax(energy))


def spearman(a, b) -> float:
    return float(spearmanr(a, b).statistic)


@dataclass(eq=False)
class NTKReport:
    k: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    dominant_freq: np.ndarray
    decay_rates: np.ndarray | None = None

    def symmetry_residual(self) -> float:
        return float(np.abs(self.k - self.k.T).max() / np.abs(self.k).max())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["mode", "eigenvalue", "dominant_freq", "decay_rate"])
        for i, (lam, f) in enumerate(zip(self.eigenvalues, self.dominant_freq)):
            rate = "" if self.decay_rates is None or i >= len(self.decay_rates) else repr(float(self.decay_rates[i]))
            w.writerow([i, repr(float(lam)), int(f), rate])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "eigenvalues": self.eigenvalues.tolist(),
            "dominant_freq": [int(f) for f in self.dominant_freq],
            "decay_rates": None if self.decay_rates is None else self.decay_rates.tolist(),
            "symmetry_residual": self.symmetry_residual(),
        })


def ntk_report(params: MLPParams, grid, n_modes: int | None = None,
               budget: int = DEFAULT_NTK_BUDGET) -> NTKReport:
    """Kernel at ``params`` on ``grid``, its spectrum and each mode's dominant frequency."""
    grid = np.asarray(grid, dtype=np.float64)
    k = ntk_matrix(params, grid, budget)
    q, lam = eigendecomp_sym(k)
    m = lam.size if n_modes is None else min(n_modes, lam.size)
    freqs = np.array([dominant_frequency(q[:, i], grid) for i in range(m)])
    return NTKReport(k=k, eigenvalues=lam, eigenvectors=q, dominant_freq=freqs)
