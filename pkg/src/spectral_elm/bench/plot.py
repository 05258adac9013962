"""Minimal hand-written SVG overlay of closed form (blue) against prediction (red)."""

from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .experiments import RunManifest, atomic_write

WIDTH, HEIGHT = 720, 420
MARGIN = dict(left=60, right=20, top=40, bottom=50)


def _polyline(xs, ys, colour: str) -> str:
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    return f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>'


def render_svg(x, f_true, f_pred, title: str) -> str:
    x, f_true, f_pred = (np.asarray(a, dtype=float) for a in (x, f_true, f_pred))
    if x.size == 0:
        raise ValueError("nothing to plot: empty prediction set")
    x0, x1 = float(x.min()), float(x.max())
    both = np.concatenate([f_true, f_pred])
    y0, y1 = float(both.min()), float(both.max())
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN["top"] + (y1 - v) / (y1 - y0) * ph

    bottom = MARGIN["top"] + ph
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in np.linspace(x0, x1, 5):
        parts.append(f'<text x="{sx(v):.2f}" y="{bottom + 16}" text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{v:.2f}</text>')
    for v in np.linspace(y0, y1, 5):
        parts.append(f'<text x="{MARGIN["left"] - 6}" y="{sy(v) + 4:.2f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{v:.3g}</text>')
    parts += [
        f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">x</text>',
        f'<text x="16" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13" transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.1f})">f(x)</text>',
        _polyline(sx(x), sy(f_true), "blue"),
        _polyline(sx(x), sy(f_pred), "red"),
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def read_predictions(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = [np.array([float(r[c]) for r in rows]) for c in ("x", "f_true", "f_pred")]
    return cols[0], cols[1], cols[2]


def emit_plot(run: RunManifest, seed: int | None = None) -> Path:
    """Write ``plot.svg`` next to the manifest, from the first seed's predictions by default."""
    if run.root is None:
        raise FileNotFoundError(f"{run.spec.id}: run has no artifact directory")
    seed = run.spec.seeds[0] if seed is None else seed
    key = f"predictions[{seed}]"
    if key not in run.artifacts:
        raise FileNotFoundError(f"{run.spec.id}: no prediction CSV recorded for seed {seed}")
    src = Path(run.root) / run.artifacts[key]
    if not src.is_file():
        raise FileNotFoundError(f"{run.spec.id}: missing artifact {src}")
    x, f_true, f_pred = read_predictions(src)
    out = Path(run.root) / "plot.svg"
    atomic_write(out, render_svg(x, f_true, f_pred, f"{run.spec.id} ({run.spec.target.label}, seed {seed})"))
    run.artifacts["plot"] = "plot.svg"
    return out
