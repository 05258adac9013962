"""Single-hidden-layer Extreme Learning Machine.

The input-to-hidden weights and hidden biases are drawn once from a
configurable distribution and frozen. Only the linear output layer is
solved, in one shot, as the minimum-norm least-squares solution
``beta = pinv(H) @ T`` of the hidden-activation system ``H beta = T``.

Random draws use numpy's ``default_rng`` (PCG64) seeded by ``config.seed``;
weights are drawn first (``hidden x n_in``, row-major), then biases.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .datagen import Dataset
from .linops import PinvOptions, ShapeError, numerical_rank, solve_from_svd, svd_thin

# Relative singular-value cutoff for the output-layer solve. At N == L the
# min-norm interpolant sits on the double-descent variance peak; truncating
# at 1e-9 * sigma_max keeps high-SD fits stable without losing the smooth ones.
ELM_RCOND = 1e-9


@dataclass(frozen=True)
class Uniform:
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"uniform init needs low < high, got [{self.low}, {self.high})")

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.uniform(self.low, self.high, size=size)

    @property
    def sd(self) -> float:
        return (self.high - self.low) / np.sqrt(12.0)


@dataclass(frozen=True)
class Normal:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not self.sd > 0:
            raise ValueError(f"normal init needs sd > 0, got {self.sd}")

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.normal(self.mean, self.sd, size=size)


WeightInit = Uniform | Normal


def init_to_dict(init: WeightInit) -> dict:
    return {"kind": type(init).__name__.lower(), **asdict(init)}


def init_from_dict(d: dict) -> WeightInit:
    d = dict(d)
    kind = d.pop("kind")
    return {"uniform": Uniform, "normal": Normal}[kind](**d)


@dataclass(frozen=True)
class ELMConfig:
    n_in: int = 1
    n_out: int = 1
    hidden: int = 800
    activation: str = "tanh"
    init: WeightInit = field(default_factory=Normal)
    seed: int = 0
    rcond: PinvOptions = field(default_factory=lambda: PinvOptions(ELM_RCOND))

    def __post_init__(self):
        for name in ("n_in", "n_out", "hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation {self.activation!r}; only 'tanh' is available")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def to_dict(self) -> dict:
        return {
            "n_in": self.n_in,
            "n_out": self.n_out,
            "hidden": self.hidden,
            "activation": self.activation,
            "init": init_to_dict(self.init),
            "seed": self.seed,
            "rcond": self.rcond.rcond,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ELMConfig":
        d = dict(d)
        d["init"] = init_from_dict(d["init"])
        d["rcond"] = PinvOptions(d["rcond"])
        return cls(**d)


@dataclass(frozen=True)
class FitReport:
    train_rmse: float
    train_rel_l2: float
    rank_h: int
    fit_wall_time: float  # milliseconds


@dataclass(frozen=True, eq=False)
class ELMModel:
    w: np.ndarray
    b: np.ndarray
    config: ELMConfig
    beta: np.ndarray | None = None

    @property
    def fitted(self) -> bool:
        return self.beta is not None

    def to_json(self) -> str:
        # json writes floats with repr(), which round-trips float64 exactly
        return json.dumps({
            "config": self.config.to_dict(),
            "w": self.w.tolist(),
            "b": self.b.tolist(),
            "beta": None if self.beta is None else self.beta.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "ELMModel":
        d = json.loads(text)
        beta = d["beta"]
        return cls(
            w=_frozen(d["w"]),
            b=_frozen(d["b"]),
            config=ELMConfig.from_dict(d["config"]),
            beta=None if beta is None else _frozen(beta),
        )


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def _inputs(x, n_in: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None] if n_in == 1 else x[None, :]
    if x.ndim != 2 or x.shape[1] != n_in:
        raise ShapeError(f"expected inputs with {n_in} column(s), got shape {x.shape}")
    return x


def init_random(config: ELMConfig) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(config.seed)
    w = config.init.draw(rng, (config.hidden, config.n_in))
    b = config.init.draw(rng, config.hidden)
    return _frozen(w), _frozen(b)


def hidden_matrix(w, b, x) -> np.ndarray:
    """``H[j, l] = tanh(sum_i w[l, i] * x[j, i] + b[l])``."""
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if w.ndim != 2 or b.shape != (w.shape[0],):
        raise ShapeError(f"weights {w.shape} and biases {b.shape} are inconsistent")
    x = _inputs(x, w.shape[1])
    with np.errstate(over="ignore", invalid="ignore"):
        h = np.tanh(x @ w.T + b)
    bad = ~np.isfinite(h)
    if bad.any():
        node = int(np.flatnonzero(bad.any(axis=0))[0])
        raise FloatingPointError(f"hidden node {node} produced non-finite activations")
    return h


def fit(config: ELMConfig, train: Dataset) -> tuple[ELMModel, FitReport]:
    if len(train) == 0:
        raise ValueError("cannot fit on an empty dataset")
    if not np.all(np.isfinite(train.x)):
        raise ValueError("training inputs contain non-finite values")
    w, b = init_random(config)
    t = np.asarray(train.y, dtype=np.float64).reshape(len(train), config.n_out)

    start = time.perf_counter()
    h = hidden_matrix(w, b, train.x)
    svd = svd_thin(h)
    beta = solve_from_svd(svd, t, config.rcond)
    elapsed_ms = (time.perf_counter() - start) * 1e3

    resid = h @ beta - t
    t_norm = np.linalg.norm(t)
    report = FitReport(
        train_rmse=float(np.sqrt(np.mean(resid**2))),
        train_rel_l2=float(np.linalg.norm(resid) / t_norm) if t_norm > 0 else float(np.linalg.norm(resid)),
        rank_h=numerical_rank(svd, config.rcond),
        fit_wall_time=elapsed_ms,
    )
    return ELMModel(w=w, b=b, config=config, beta=_frozen(beta)), report


def predict(model: ELMModel, x) -> np.ndarray:
    """Outputs ``H(x) @ beta``, shape ``(n_samples, n_out)``."""
    if not model.fitted:
        raise RuntimeError("model has not been fitted")
    return hidden_matrix(model.w, model.b, x) @ model.beta
