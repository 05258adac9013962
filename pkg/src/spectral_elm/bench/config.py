"""Flat ``key = value`` experiment files.

Example::

    # k = 20 with matched SD
    id = fig12
    target = sine:20
    init = normal
    sd = 20
    seeds = 0, 1, 2, 3, 4
    expected = true
"""

from __future__ import annotations

from pathlib import Path

from ..datagen import GridSpec, SplitSpec, parse_target
from ..elm import ELM_RCOND, Normal, Uniform
from ..gdnet import MLPConfig
from .experiments import DEFAULT_SEEDS, ExperimentSpec

KEYS = {
    "id", "target", "method", "init", "sd", "mean", "low", "high", "hidden", "seeds", "threshold",
    "n_points", "x_min", "x_max", "test_stride", "rcond", "expected",
    "lr", "max_iters", "layers", "snapshot_every",
}


def parse_config(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lower().replace("-", "_")
        if not sep or not key:
            raise ValueError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key not in KEYS:
            raise ValueError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ValueError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def load_config(path) -> dict[str, str]:
    path = Path(path)
    return parse_config(path.read_text(), str(path))


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "yes", "1", "captured"):
        return True
    if t in ("false", "no", "0", "not-captured"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in text.replace(",", " ").split())


def spec_from_config(cfg: dict[str, str]) -> ExperimentSpec:
    """Build an :class:`ExperimentSpec`; missing keys take the usual defaults."""
    g = cfg.get
    kind = g("init", "normal").lower()
    if kind == "normal":
        init = Normal(float(g("mean", 0.0)), float(g("sd", 1.0)))
    elif kind == "uniform":
        init = Uniform(float(g("low", 0.0)), float(g("high", 1.0)))
    else:
        raise ValueError(f"init must be 'normal' or 'uniform', got {kind!r}")
    grid = GridSpec(float(g("x_min", GridSpec.x_min)), float(g("x_max", GridSpec.x_max)),
                    int(g("n_points", GridSpec.n_points)))
    method = g("method", "elm")
    mlp = None
    if method == "gd-ann":
        base = MLPConfig()
        mlp = MLPConfig(
            layer_sizes=_ints(g("layers")) if "layers" in cfg else base.layer_sizes,
            learning_rate=float(g("lr", base.learning_rate)),
            max_iters=int(g("max_iters", base.max_iters)),
            snapshot_every=int(g("snapshot_every", base.snapshot_every)),
        )
    rcond = g("rcond")
    target = parse_target(g("target", "multisine"))
    return ExperimentSpec(
        id=g("id", target.label),
        target=target,
        method=method,
        init=init,
        hidden=int(g("hidden", 800)),
        seeds=_ints(g("seeds")) if "seeds" in cfg else DEFAULT_SEEDS,
        threshold=float(g("threshold", 0.05)),
        grid=grid,
        split=SplitSpec(int(g("test_stride", 5))),
        rcond=ELM_RCOND if rcond is None else (None if rcond.lower() in ("none", "default") else float(rcond)),
        mlp=mlp,
        expected=None if "expected" not in cfg else _bool(g("expected")),
    )
