"""Dense real linear algebra used by the ELM solve.

Matrices are plain ``numpy.ndarray`` objects of dtype float64 and rank 2.
Every public function validates its inputs with :func:`as_matrix`, so callers
may pass lists or 1-D arrays where a column/row is unambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite, C-contiguous float64 matrix.

    1-D input is treated as a single column.
    """
    m = np.array(a, dtype=np.float64, order="C", copy=True)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"{name} must be a non-empty 2-D array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


class SvdResult(NamedTuple):
    u: np.ndarray
    singular_values: np.ndarray
    v_t: np.ndarray


@dataclass(frozen=True)
class PinvOptions:
    """Relative singular-value cutoff for pseudoinverse and least squares.

    ``rcond=None`` selects ``max(rows, cols) * eps`` for the matrix at hand.
    """

    rcond: float | None = None

    def __post_init__(self):
        if self.rcond is not None and not (0.0 < self.rcond < 1.0):
            raise ValueError(f"rcond must lie in (0, 1), got {self.rcond}")

    def resolve(self, shape: tuple[int, int]) -> float:
        if self.rcond is None:
            return max(shape) * np.finfo(np.float64).eps
        return self.rcond


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


def svd_thin(a) -> SvdResult:
    """Thin SVD ``a = u @ diag(s) @ v_t`` with ``s`` non-increasing."""
    a = as_matrix(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"SVD failed to converge for {a.shape[0]}x{a.shape[1]} matrix "
            f"(frobenius norm {np.linalg.norm(a):.3e}, max |entry| {np.abs(a).max():.3e}): {exc}"
        ) from exc
    return SvdResult(u, s, vt)


def _kept(svd: SvdResult, opts: PinvOptions) -> np.ndarray:
    s = svd.singular_values
    shape = (svd.u.shape[0], svd.v_t.shape[1])
    if s.size == 0 or s[0] == 0.0:
        return np.zeros_like(s, dtype=bool)
    return s > opts.resolve(shape) * s[0]


def numerical_rank(svd: SvdResult, opts: PinvOptions = PinvOptions()) -> int:
    return int(np.count_nonzero(_kept(svd, opts)))


def _inverse_singular_values(svd: SvdResult, opts: PinvOptions) -> np.ndarray:
    keep = _kept(svd, opts)
    inv = np.zeros_like(svd.singular_values)
    inv[keep] = 1.0 / svd.singular_values[keep]
    return inv


def pinv(a, opts: PinvOptions = PinvOptions()) -> np.ndarray:
    """Moore-Penrose pseudoinverse via truncated SVD."""
    svd = svd_thin(a)
    inv = _inverse_singular_values(svd, opts)
    return (svd.v_t.T * inv) @ svd.u.T


def solve_from_svd(svd: SvdResult, t: np.ndarray, opts: PinvOptions = PinvOptions()) -> np.ndarray:
    """Minimum-norm least-squares solution given a precomputed SVD of the system matrix."""
    inv = _inverse_singular_values(svd, opts)
    return svd.v_t.T @ (inv[:, None] * (svd.u.T @ t))


def solve_least_squares(h, t, opts: PinvOptions = PinvOptions()) -> np.ndarray:
    """Minimum-norm solution of ``min ||h @ beta - t||``; equals ``pinv(h) @ t``."""
    h = as_matrix(h, "h")
    t = as_matrix(t, "t")
    if h.shape[0] != t.shape[0]:
        raise ShapeError(f"h has {h.shape[0]} rows but t has {t.shape[0]}")
    return solve_from_svd(svd_thin(h), t, opts)
