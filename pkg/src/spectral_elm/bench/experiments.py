"""Declarative experiment specs and the runners that execute them."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .. import __version__
from ..datagen import (
    Dataset,
    GridSpec,
    MultiSine,
    SingleSine,
    SplitSpec,
    TargetSpec,
    parse_target,
    sample,
    split,
)
from ..elm import ELM_RCOND, ELMConfig, Normal, Uniform, WeightInit, fit, init_from_dict, init_to_dict, predict
from ..gdnet import (
    DEFAULT_NTK_BUDGET,
    MLPConfig,
    NTKReport,
    fit_decay_rates,
    forward,
    init_params,
    ntk_report,
    projected_error_trace,
    spearman,
    train_full_batch,
)
from ..linops import PinvOptions
from ..spectral import CaptureReport, capture_verdict, per_frequency_errors, project_sines

DEFAULT_SEEDS = (0, 1, 2, 3, 4)
METHODS = ("elm", "gd-ann")


class ExperimentError(RuntimeError):
    """A failure inside one seed of one experiment."""

    def __init__(self, spec_id: str, seed: int, stage: str, cause: BaseException):
        super().__init__(f"{spec_id} seed={seed} stage={stage}: {type(cause).__name__}: {cause}")
        self.spec_id = spec_id
        self.seed = seed
        self.stage = stage


@dataclass(frozen=True)
class ExperimentSpec:
    id: str
    target: TargetSpec
    method: str = "elm"
    init: WeightInit = field(default_factory=Normal)
    hidden: int = 800
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    threshold: float = 0.05
    grid: GridSpec = field(default_factory=GridSpec)
    split: SplitSpec = field(default_factory=SplitSpec)
    rcond: float | None = ELM_RCOND
    mlp: MLPConfig | None = None
    expected: bool | None = None

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.id:
            raise ValueError("experiment id must be non-empty")
        if not self.seeds:
            raise ValueError(f"{self.id}: seeds must be non-empty")
        if any(not 0 <= s < 2**64 for s in self.seeds):
            raise ValueError(f"{self.id}: seeds must be unsigned 64-bit integers")
        if self.method not in METHODS:
            raise ValueError(f"{self.id}: method must be one of {METHODS}, got {self.method!r}")
        if self.hidden < 1:
            raise ValueError(f"{self.id}: hidden must be positive")
        if not self.threshold > 0:
            raise ValueError(f"{self.id}: threshold must be positive")

    def elm_config(self, seed: int) -> ELMConfig:
        return ELMConfig(hidden=self.hidden, init=self.init, seed=seed, rcond=PinvOptions(self.rcond))

    def mlp_config(self, seed: int) -> MLPConfig:
        base = self.mlp or MLPConfig()
        return replace(base, seed=seed, threshold=self.threshold)

    def to_dict(self) -> dict:
        mlp = None
        if self.mlp is not None:
            mlp = {k: getattr(self.mlp, k) for k in self.mlp.__dataclass_fields__}
            mlp["layer_sizes"] = list(mlp["layer_sizes"])
        return {
            "id": self.id,
            "target": self.target.label,
            "method": self.method,
            "init": init_to_dict(self.init),
            "hidden": self.hidden,
            "seeds": list(self.seeds),
            "threshold": self.threshold,
            "grid": {"x_min": self.grid.x_min, "x_max": self.grid.x_max, "n_points": self.grid.n_points},
            "split": {"test_stride": self.split.test_stride},
            "rcond": self.rcond,
            "mlp": mlp,
            "expected": self.expected,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        d["target"] = parse_target(d["target"])
        d["init"] = init_from_dict(d["init"])
        d["grid"] = GridSpec(**d["grid"])
        d["split"] = SplitSpec(**d["split"])
        if d.get("mlp") is not None:
            d["mlp"] = MLPConfig(**d["mlp"])
        return cls(**d)


def majority(flags) -> bool:
    flags = list(flags)
    return sum(flags) * 2 > len(flags)


@dataclass
class RunManifest:
    spec: ExperimentSpec
    reports: list[CaptureReport]
    wall_times_ms: list[float]
    artifacts: dict[str, str] = field(default_factory=dict)
    root: str | None = None
    converged_at: list[int | None] | None = None
    version: str = __version__
    timestamp: str = ""

    def __post_init__(self):
        if len(self.reports) != len(self.spec.seeds):
            raise ValueError("one capture report per seed is required")

    @property
    def median_rel_l2(self) -> float:
        return float(np.median([r.rel_l2 for r in self.reports]))

    @property
    def verdict(self) -> bool:
        return majority(r.captured for r in self.reports)

    @property
    def matches_expectation(self) -> bool:
        return self.spec.expected is None or self.spec.expected == self.verdict

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "per_seed": [
                {"seed": s, **r.to_dict(), "wall_time_ms": t}
                for s, r, t in zip(self.spec.seeds, self.reports, self.wall_times_ms)
            ],
            "median_rel_l2": self.median_rel_l2,
            "verdict": self.verdict,
            "expected": self.spec.expected,
            "matches_expectation": self.matches_expectation,
            "converged_at": self.converged_at,
            "artifacts": self.artifacts,
            "version": self.version,
            "timestamp": self.timestamp,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def load(cls, path) -> "RunManifest":
        path = Path(path)
        d = json.loads(path.read_text())
        reports = [
            CaptureReport(rel_l2=p["rel_l2"], captured=p["captured"], threshold=p["threshold"],
                          per_freq_rel_error={int(k): v for k, v in p["per_freq_rel_error"].items()})
            for p in d["per_seed"]
        ]
        return cls(spec=ExperimentSpec.from_dict(d["spec"]), reports=reports,
                   wall_times_ms=[p["wall_time_ms"] for p in d["per_seed"]],
                   artifacts=d["artifacts"], root=str(path.parent), converged_at=d["converged_at"],
                   version=d["version"], timestamp=d["timestamp"])


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def predictions_csv(x, f_true, f_pred) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "f_true", "f_pred"])
    for row in zip(x, f_true, f_pred):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def _is_periodic(grid: GridSpec) -> bool:
    return abs((grid.x_max - grid.x_min) - 2 * math.pi) < 1e-9


def _run_seed(spec: ExperimentSpec, seed: int, full: Dataset, train: Dataset, test: Dataset):
    """Fit one seed; returns (full-grid prediction, test prediction, fit ms, converged_at)."""
    stage = "fit"
    try:
        if spec.method == "elm":
            model, rep = fit(spec.elm_config(seed), train)
            stage = "predict"
            return predict(model, full.x)[:, 0], predict(model, test.x)[:, 0], rep.fit_wall_time, None
        t0 = time.perf_counter()
        trace = train_full_batch(spec.mlp_config(seed), train, test)
        ms = (time.perf_counter() - t0) * 1e3
        stage = "predict"
        return (forward(trace.params, full.x)[:, 0], forward(trace.params, test.x)[:, 0], ms,
                trace.converged_at)
    except Exception as exc:
        raise ExperimentError(spec.id, seed, stage, exc) from exc


def run_experiment(spec: ExperimentSpec, out_dir=None, *, plot: bool = False) -> RunManifest:
    """Run every seed of ``spec``; with ``out_dir``, write artifacts under ``out_dir/<id>/``."""
    try:
        full = sample(spec.target, spec.grid)
        train, test = split(full, spec.split)
    except Exception as exc:
        raise ExperimentError(spec.id, spec.seeds[0], "data", exc) from exc
    periodic = _is_periodic(spec.grid)
    root = None if out_dir is None else Path(out_dir) / spec.id
    reports, times, conv, artifacts = [], [], [], {}
    for seed in spec.seeds:
        full_pred, test_pred, ms, converged = _run_seed(spec, seed, full, train, test)
        try:
            rep = capture_verdict(test_pred, test.y, spec.threshold)
        except Exception as exc:
            raise ExperimentError(spec.id, seed, "evaluate", exc) from exc
        # per-frequency errors need a whole period, so they use the full grid
        if periodic:
            rep = replace(rep, per_freq_rel_error=per_frequency_errors(full_pred, full.y, full.x))
        reports.append(rep)
        times.append(ms)
        conv.append(converged)
        if root is not None:
            pred_rel = f"seed-{seed}/predictions.csv"
            atomic_write(root / pred_rel, predictions_csv(test.x, test.y, test_pred))
            artifacts[f"predictions[{seed}]"] = pred_rel
            if periodic:
                spec_rel = f"seed-{seed}/spectrum.csv"
                atomic_write(root / spec_rel, project_sines(full_pred, full.x).to_csv())
                artifacts[f"spectrum[{seed}]"] = spec_rel
    run = RunManifest(
        spec=spec, reports=reports, wall_times_ms=times, artifacts=artifacts,
        root=None if root is None else str(root),
        converged_at=conv if spec.method == "gd-ann" else None,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    if root is not None:
        if plot:
            from .plot import emit_plot

            emit_plot(run)
        atomic_write(root / "manifest.json", run.to_json())
    return run


@dataclass(frozen=True)
class SweepPoint:
    value: float
    median_rel_l2: float
    verdict: bool
    wall_time_ms: float | None = None
    converged_at: tuple[int | None, ...] | None = None


@dataclass
class SweepResult:
    axis: str
    points: list[SweepPoint]
    runs: list[RunManifest] = field(default_factory=list, repr=False)
    open_points: list[str] = field(default_factory=list)

    def __post_init__(self):
        vals = [p.value for p in self.points]
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError(f"sweep axis values must be strictly increasing, got {vals}")

    @property
    def values(self) -> list[float]:
        return [p.value for p in self.points]

    @property
    def verdicts(self) -> list[bool]:
        return [p.verdict for p in self.points]

    @property
    def errors(self) -> list[float]:
        return [p.median_rel_l2 for p in self.points]

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "points": [
                {"value": p.value, "median_rel_l2": p.median_rel_l2, "verdict": p.verdict,
                 "wall_time_ms": p.wall_time_ms,
                 "converged_at": None if p.converged_at is None else list(p.converged_at)}
                for p in self.points
            ],
            "open_points": self.open_points,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([self.axis, "median_rel_l2", "verdict", "wall_time_ms", "converged_at"])
        for p in self.points:
            conv = "" if p.converged_at is None else ";".join("" if c is None else str(c) for c in p.converged_at)
            w.writerow([p.value, repr(p.median_rel_l2), int(p.verdict),
                        "" if p.wall_time_ms is None else f"{p.wall_time_ms:.3f}", conv])
        return buf.getvalue()


def _strictly_increasing(values, what: str) -> list:
    values = list(values)
    if not values:
        raise ValueError(f"{what} must be non-empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{what} must be strictly increasing, got {values}")
    return values


def run_sd_sweep(k: int | None, sds, base: ExperimentSpec, out_dir=None) -> SweepResult:
    """One ELM run per normal-init SD; ``k=None`` keeps the base target."""
    sds = _strictly_increasing(sds, "sds")
    target = base.target if k is None else SingleSine(k)
    runs, points = [], []
    for sd in sds:
        spec = replace(base, id=f"{base.id}-sd{sd:g}", target=target, init=Normal(0.0, float(sd)), expected=None)
        run = run_experiment(spec, out_dir)
        runs.append(run)
        points.append(SweepPoint(float(sd), run.median_rel_l2, run.verdict, float(np.median(run.wall_times_ms))))
    return SweepResult("sd", points, runs)


def run_l_sweep(ls, base: ExperimentSpec, out_dir=None) -> SweepResult:
    """Hidden-width sweep; wall time is the median fit time over the seeds."""
    ls = _strictly_increasing(ls, "ls")
    runs, points = [], []
    for width in ls:
        spec = replace(base, id=f"{base.id}-L{width}", hidden=int(width), expected=None)
        run = run_experiment(spec, out_dir)
        runs.append(run)
        points.append(SweepPoint(int(width), run.median_rel_l2, run.verdict, float(np.median(run.wall_times_ms))))
    return SweepResult("L", points, runs)


def run_table1(ks, mlp: MLPConfig = MLPConfig(), *, seeds=(0,), grid: GridSpec = GridSpec(),
               split_spec: SplitSpec = SplitSpec(), fail_fast: bool = False) -> SweepResult:
    """Iterations to convergence of gradient descent on single sines.

    Runs that do not converge within ``mlp.max_iters`` are recorded in
    ``open_points``. With ``fail_fast`` the sweep stops at the first such run,
    since strict ordering over all seeds can no longer hold.
    """
    ks = _strictly_increasing(ks, "ks")
    points, notes = [], []
    stopped = False
    for k in ks:
        if stopped:
            break
        train, test = split(sample(SingleSine(k), grid), split_spec)
        conv, errs, times = [], [], []
        for seed in seeds:
            cfg = replace(mlp, seed=seed)
            t0 = time.perf_counter()
            trace = train_full_batch(cfg, train, test)
            times.append((time.perf_counter() - t0) * 1e3)
            errs.append(capture_verdict(forward(trace.params, test.x)[:, 0], test.y, cfg.threshold).rel_l2)
            conv.append(trace.converged_at)
            if trace.converged_at is None:
                notes.append(f"k={k} seed={seed}: not converged within {cfg.max_iters} iterations "
                             f"(final test rel L2 {errs[-1]:.4f})")
                if fail_fast:
                    stopped = True
                    break
        points.append(SweepPoint(k, float(np.median(errs)), all(c is not None for c in conv),
                                 float(np.median(times)), tuple(conv)))
    return SweepResult("k", points, open_points=notes)


def table1_ordered(result: SweepResult, n_seeds: int) -> bool:
    """True iff every seed converged at every k with strictly increasing iteration counts."""
    if any(p.converged_at is None or len(p.converged_at) != n_seeds for p in result.points):
        return False
    for s in range(n_seeds):
        seq = [p.converged_at[s] for p in result.points]
        if any(c is None for c in seq) or any(b <= a for a, b in zip(seq, seq[1:])):
            return False
    return True


@dataclass
class NTKRun:
    report: NTKReport
    summary: dict
    artifacts: dict[str, str] = field(default_factory=dict)


def run_ntk_report(mlp: MLPConfig, n_samples: int, out_dir=None, *, n_modes: int = 20,
                   decay_iters: int = 0, decay_snapshot: int = 10, lr_scale: float = 0.1,
                   budget: int = DEFAULT_NTK_BUDGET) -> NTKRun:
    """Kernel spectrum at initialisation on an ``n_samples`` grid over one period.

    With ``decay_iters > 0`` the network is also trained on a seeded white-noise
    target at learning rate ``lr_scale * N / (2 lambda_max)``, and per-mode
    residual decay rates are compared with the eigenvalues.
    """
    grid_x = sample(MultiSine(), GridSpec(n_points=n_samples)).x
    params = init_params(mlp)
    rep = ntk_report(params, grid_x, budget=budget)
    lam, q, k = rep.eigenvalues, rep.eigenvectors, rep.k
    m = min(n_modes, lam.size)
    bottom = rep.dominant_freq[-10:]
    summary = {
        "n_samples": n_samples,
        "layer_sizes": list(mlp.layer_sizes),
        "seed": mlp.seed,
        "n_modes": m,
        "symmetry_residual": rep.symmetry_residual(),
        "min_eig_ratio": float(lam[-1] / lam[0]),
        "reconstruction_error": float(np.linalg.norm((q * lam) @ q.T - k) / np.linalg.norm(k)),
        "spearman_rank_freq": spearman(np.arange(m), rep.dominant_freq[:m]),
        "top_mode_freq": int(rep.dominant_freq[0]),
        "bottom10_median_freq": float(np.median(bottom)),
    }
    if decay_iters > 0:
        n = grid_x.size
        noise = np.random.default_rng([mlp.seed, 0x7E57]).normal(size=n)
        cfg = replace(mlp, learning_rate=lr_scale * n / (2 * lam[0]), max_iters=decay_iters,
                      snapshot_every=decay_snapshot)
        trace = train_full_batch(cfg, Dataset(x=grid_x, y=noise, spec=MultiSine(), grid=GridSpec(n_points=n)))
        iters, curves = projected_error_trace(q[:, :m], trace)
        rates = fit_decay_rates(iters, curves)
        rep.decay_rates = rates
        summary["learning_rate"] = cfg.learning_rate
        summary["spearman_decay_eig"] = spearman(lam[:m], rates)
    run = NTKRun(rep, summary)
    if out_dir is not None:
        out = Path(out_dir)
        spectrum = "k,eigenvalue\n" + "".join(f"{i},{float(v)!r}\n" for i, v in enumerate(lam))
        for name, text in (("ntk_spectrum.csv", spectrum), ("ntk_modes.csv", rep.to_csv()),
                           ("ntk_summary.json", json.dumps(summary, indent=2))):
            atomic_write(out / name, text)
            run.artifacts[name] = str(out / name)
    return run


def suggested_sd(target: TargetSpec) -> float:
    """Normal-init SD matched to the highest frequency in the target."""
    return float(target.max_frequency)


def paper_suite(seeds=DEFAULT_SEEDS, hidden: int = 800, threshold: float = 0.05) -> list[ExperimentSpec]:
    """Every ELM scenario of the reproduction, with the expected verdict where one is bound."""
    def elm(id_, target, init, expected):
        return ExperimentSpec(id=id_, target=target, init=init, hidden=hidden, seeds=tuple(seeds),
                              threshold=threshold, expected=expected)

    u, n = Uniform(), Normal
    return [
        elm("fig3", MultiSine(), u, None),
        elm("fig4", MultiSine(), n(0, 1), True),
        elm("fig5", SingleSine(2), u, None),
        elm("fig6", SingleSine(6), u, None),
        elm("fig7", SingleSine(10), u, None),
        elm("fig8", SingleSine(2), n(0, 1), True),
        elm("fig9", SingleSine(6), n(0, 1), True),
        elm("fig10", SingleSine(10), n(0, 1), True),
        elm("fig11", SingleSine(20), n(0, 1), False),
        elm("fig12", SingleSine(20), n(0, 20), True),
        elm("fig13", SingleSine(50), n(0, 1), False),
        elm("fig14", SingleSine(50), n(0, 50), True),
        elm("fig15", SingleSine(50), n(0, 20), True),
        elm("fig16", SingleSine(50), n(0, 7), None),
        elm("fig17", SingleSine(50), n(0, 5), None),
        elm("fig18", SingleSine(6), n(0, 50), True),
    ]
