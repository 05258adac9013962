"""Fourier content of sampled signals and the relative-error capture verdict.

Signals live on a closed, uniform grid spanning one period (length 2*pi).
Projections use trapezoid weights, so the duplicated endpoint of a periodic
signal is counted once and pure tones are recovered to rounding error.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

DEFAULT_THRESHOLD = 0.05
COEFF_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    k_max: int
    a: np.ndarray  # cosine coefficients, k = 0..k_max
    b: np.ndarray  # sine coefficients, k = 0..k_max

    def amplitude(self) -> np.ndarray:
        return np.hypot(self.a, self.b)

    def energy(self) -> float:
        """Mean square implied by the coefficients (Parseval)."""
        return float(self.a[0] ** 2 + 0.5 * np.sum(self.a[1:] ** 2 + self.b[1:] ** 2))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "a_k", "b_k"])
        for k in range(self.k_max + 1):
            w.writerow([k, repr(float(self.a[k])), repr(float(self.b[k]))])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"k_max": self.k_max, "a_k": self.a.tolist(), "b_k": self.b.tolist()})


@dataclass(frozen=True)
class CaptureReport:
    rel_l2: float
    captured: bool
    threshold: float = DEFAULT_THRESHOLD
    per_freq_rel_error: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_freq_rel_error"] = {str(k): v for k, v in self.per_freq_rel_error.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "rel_err"])
        for k in sorted(self.per_freq_rel_error):
            w.writerow([k, repr(float(self.per_freq_rel_error[k]))])
        return buf.getvalue()


def _trapezoid_weights(grid: np.ndarray) -> tuple[np.ndarray, float]:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 3:
        raise ValueError("grid must be a 1-D array of at least 3 points")
    steps = np.diff(grid)
    h = (grid[-1] - grid[0]) / (grid.size - 1)
    if np.max(np.abs(steps - h)) > 1e-9 * max(1.0, abs(h)):
        raise ValueError("grid is not uniform")
    if abs((grid[-1] - grid[0]) - 2 * math.pi) > 1e-9:
        raise ValueError(f"grid spans {grid[-1] - grid[0]!r}, expected one period of 2*pi")
    w = np.full(grid.size, h)
    w[0] = w[-1] = h / 2
    return w, h


def max_exact_frequency(n_points: int) -> int:
    """Highest k for which the trapezoid projection on ``n_points`` is exact."""
    return (n_points - 2) // 2


def project_sines(values, grid, k_max: int | None = None) -> SpectrumReport:
    """Fourier coefficients normalised so ``cos(kx)``, ``sin(kx)`` and 1 each give 1."""
    values = np.asarray(values, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    if values.shape != grid.shape:
        raise ValueError(f"values {values.shape} and grid {grid.shape} differ in shape")
    w, _ = _trapezoid_weights(grid)
    if k_max is None:
        k_max = max_exact_frequency(grid.size)
    ks = np.arange(k_max + 1)
    phase = np.outer(ks, grid)
    wv = w * values
    a = np.cos(phase) @ wv / math.pi
    b = np.sin(phase) @ wv / math.pi
    a[0] /= 2
    b[0] = 0.0
    return SpectrumReport(k_max=k_max, a=a, b=b)


def mean_square(values, grid) -> float:
    """Mean square over one period, trapezoid-weighted."""
    w, _ = _trapezoid_weights(grid)
    v = np.asarray(values, dtype=np.float64)
    return float(np.sum(w * v * v) / (2 * math.pi))


def relative_l2_error(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    if pred.shape != target.shape:
        raise ValueError(f"pred {pred.shape} and target {target.shape} differ in length")
    denom = np.linalg.norm(target)
    if denom == 0.0:
        raise ValueError("target has zero norm; relative error undefined")
    return float(np.linalg.norm(pred - target) / denom)


def per_frequency_errors(pred, target, grid, k_max: int | None = None) -> dict[int, float]:
    """Relative amplitude error at each frequency present in ``target``."""
    tp = project_sines(target, grid, k_max)
    pp = project_sines(pred, grid, k_max)
    t_amp = tp.amplitude()
    d_amp = np.hypot(pp.a - tp.a, pp.b - tp.b)
    return {int(k): float(d_amp[k] / t_amp[k]) for k in np.flatnonzero(t_amp > COEFF_FLOOR)}


def capture_verdict(pred, target, threshold: float = DEFAULT_THRESHOLD, grid=None,
                    k_max: int | None = None) -> CaptureReport:
    """``captured`` iff relative L2 error is below ``threshold``.

    Per-frequency errors are filled only when ``grid`` (one full period) is given.
    """
    rel = relative_l2_error(pred, target)
    per_freq = per_frequency_errors(pred, target, grid, k_max) if grid is not None else {}
    return CaptureReport(rel_l2=rel, captured=rel < threshold, threshold=threshold,
                         per_freq_rel_error=per_freq)
