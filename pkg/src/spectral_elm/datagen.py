"""Sinusoidal regression targets, their sampling grid and the train/test split."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    x_min: float = -math.pi
    x_max: float = math.pi
    n_points: int = 1000

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"x_min ({self.x_min}) must be below x_max ({self.x_max})")
        if self.n_points < 2:
            raise ValueError(f"n_points must be at least 2, got {self.n_points}")


@dataclass(frozen=True)
class MultiSine:
    """Sum of five even harmonics, ``sum_{k=1..5} sin(2kx) / (2k)``."""

    def evaluate(self, x):
        x = np.asarray(x, dtype=np.float64)
        return sum(np.sin(2 * k * x) / (2 * k) for k in range(1, 6))

    @property
    def max_frequency(self) -> int:
        return 10

    @property
    def frequencies(self) -> tuple[int, ...]:
        return (2, 4, 6, 8, 10)

    @property
    def label(self) -> str:
        return "multisine"


@dataclass(frozen=True)
class SingleSine:
    """``-sin(kx) / k**2`` for a positive integer frequency ``k``."""

    k: int

    def __post_init__(self):
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise ValueError(f"frequency k must be a positive integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))

    def evaluate(self, x):
        x = np.asarray(x, dtype=np.float64)
        return -np.sin(self.k * x) / self.k**2

    @property
    def max_frequency(self) -> int:
        return self.k

    @property
    def frequencies(self) -> tuple[int, ...]:
        return (self.k,)

    @property
    def label(self) -> str:
        return f"sine-k{self.k}"


TargetSpec = MultiSine | SingleSine


def parse_target(text: str) -> TargetSpec:
    """Parse ``multisine`` or ``sine:<k>`` (also accepts a bare integer)."""
    s = text.strip().lower()
    if s in ("multisine", "multi", "eq10"):
        return MultiSine()
    if s.startswith("sine:"):
        s = s[5:]
    elif s.startswith("sine-k"):
        s = s[6:]
    try:
        return SingleSine(int(s))
    except ValueError:
        raise ValueError(f"unrecognised target {text!r}; use 'multisine' or 'sine:<k>'") from None


def eval_target(spec: TargetSpec, x):
    return spec.evaluate(x)


def make_grid(spec: GridSpec = GridSpec()) -> np.ndarray:
    x = np.linspace(spec.x_min, spec.x_max, spec.n_points)
    x[0], x[-1] = spec.x_min, spec.x_max
    return x


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    spec: TargetSpec
    grid: GridSpec
    # positions of the samples within the parent grid
    index: np.ndarray = field(default=None)

    def __post_init__(self):
        x = _readonly(self.x)
        y = _readonly(self.y)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError(f"x and y must be 1-D of equal length, got {x.shape} and {y.shape}")
        if x.size > 1 and not np.all(np.diff(x) > 0):
            raise ValueError("x must be strictly increasing")
        idx = np.arange(x.size) if self.index is None else np.asarray(self.index, dtype=np.int64)
        idx.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "index", idx)

    def __len__(self) -> int:
        return self.x.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y"])
        for xi, yi in zip(self.x, self.y):
            w.writerow([repr(float(xi)), repr(float(yi))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, spec: TargetSpec, grid: GridSpec) -> "Dataset":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls(
            x=[float(r["x"]) for r in rows],
            y=[float(r["y"]) for r in rows],
            spec=spec,
            grid=grid,
        )


@dataclass(frozen=True)
class SplitSpec:
    test_stride: int = 5

    def __post_init__(self):
        if self.test_stride < 2:
            raise ValueError(f"test_stride must be at least 2, got {self.test_stride}")


def sample(spec: TargetSpec, grid: GridSpec = GridSpec()) -> Dataset:
    x = make_grid(grid)
    return Dataset(x=x, y=eval_target(spec, x), spec=spec, grid=grid)


def split(ds: Dataset, spec: SplitSpec = SplitSpec()) -> tuple[Dataset, Dataset]:
    """Every ``test_stride``-th sample (last of each block) goes to the test set."""
    n = len(ds)
    if n < spec.test_stride:
        raise ValueError(f"dataset of {n} points is smaller than test stride {spec.test_stride}")
    pos = np.arange(n)
    is_test = pos % spec.test_stride == spec.test_stride - 1

    def subset(mask):
        return Dataset(x=ds.x[mask], y=ds.y[mask], spec=ds.spec, grid=ds.grid, index=ds.index[mask])

    return subset(~is_test), subset(is_test)
