"""Command-line entry point: ``spectral-elm <command> [options]``.

Exit status is 0 when every verdict matches its expectation, 1 on a
mismatch and 2 when a run fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from ..datagen import SingleSine, parse_target
from ..elm import Normal
from ..gdnet import MLPConfig
from .config import load_config, spec_from_config
from .experiments import (
    DEFAULT_SEEDS,
    RunManifest,
    atomic_write,
    paper_suite,
    run_experiment,
    run_l_sweep,
    run_ntk_report,
    run_sd_sweep,
    run_table1,
    suggested_sd,
    table1_ordered,
)
from .plot import emit_plot

OK, MISMATCH, FAILED = 0, 1, 2


def _floats(text: str) -> list[float]:
    return [float(s) for s in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(s) for s in text.replace(",", " ").split()]


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="flat key = value experiment file")
    p.add_argument("--seed", type=int, action="append", help="seed (repeatable; default 0..4)")
    p.add_argument("--out", type=Path, default=Path("runs"), help="artifact directory (default: runs)")
    p.add_argument("--threshold", type=float, help="capture threshold on test relative L2")
    p.add_argument("--hidden", type=int, help="hidden width L")
    p.add_argument("--sd", type=float, help="normal-init standard deviation")
    p.add_argument("--k", type=int, help="single-sine frequency")
    p.add_argument("--json", action="store_true", help="machine-readable verdicts on stdout")
    return p


def _base_spec(args, default_id: str):
    spec = spec_from_config(load_config(args.config)) if args.config else spec_from_config({"id": default_id})
    changes = {}
    if getattr(args, "target", None):
        changes["target"] = parse_target(args.target)
    if args.k is not None:
        changes["target"] = SingleSine(args.k)
    if args.seed:
        changes["seeds"] = tuple(args.seed)
    if args.threshold is not None:
        changes["threshold"] = args.threshold
    if args.hidden is not None:
        changes["hidden"] = args.hidden
    if args.sd is not None:
        changes["init"] = Normal(0.0, args.sd)
    if getattr(args, "suggest_sd", False):
        changes["init"] = Normal(0.0, suggested_sd(changes.get("target", spec.target)))
    if getattr(args, "expect", None) is not None:
        changes["expected"] = args.expect == "captured"
    if not args.config and "target" in changes and getattr(args, "id", None) is None:
        changes["id"] = changes["target"].label
    if getattr(args, "id", None):
        changes["id"] = args.id
    return replace(spec, **changes)


def _emit(args, payload: dict, lines: list[str]) -> None:
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print("\n".join(lines))


def _run_line(run: RunManifest) -> str:
    exp = "" if run.spec.expected is None else f"  expected={run.spec.expected}"
    flag = "" if run.matches_expectation else "  MISMATCH"
    return (f"{run.spec.id:<14} {run.spec.target.label:<10} median_rel_l2={run.median_rel_l2:.3e}  "
            f"captured={run.verdict}{exp}{flag}")


def cmd_fit(args) -> int:
    spec = _base_spec(args, "fit")
    run = run_experiment(spec, args.out, plot=True)
    _emit(args, run.to_dict(), [_run_line(run), f"artifacts: {run.root}"])
    return OK if run.matches_expectation else MISMATCH


def _check_sweep(args, res, name: str) -> int:
    atomic_write(args.out / f"{name}.csv", res.to_csv())
    atomic_write(args.out / f"{name}.json", json.dumps(res.to_dict(), indent=2))
    lines = [f"{res.axis}={p.value:<8g} median_rel_l2={p.median_rel_l2:.3e} captured={p.verdict}"
             + ("" if p.wall_time_ms is None else f" fit_ms={p.wall_time_ms:.1f}") for p in res.points]
    ok = True
    if getattr(args, "expect_verdicts", None):
        want = [s.strip().lower() in ("1", "true", "captured") for s in args.expect_verdicts.split(",")]
        ok = want == res.verdicts
    if getattr(args, "require_identical", False):
        ok = ok and len(set(res.verdicts)) == 1
    _emit(args, {**res.to_dict(), "ok": ok}, lines + [f"ok={ok}"])
    return OK if ok else MISMATCH


def cmd_sweep_sd(args) -> int:
    base = _base_spec(args, "sd-sweep")
    k = args.k if args.k is not None else None
    res = run_sd_sweep(k, _floats(args.sds), replace(base, id=f"sd-sweep-{(SingleSine(k) if k else base.target).label}"),
                       args.out)
    return _check_sweep(args, res, "sd_sweep")


def cmd_sweep_l(args) -> int:
    base = _base_spec(args, "l-sweep")
    res = run_l_sweep(_ints(args.ls), replace(base, id=f"l-sweep-{base.target.label}"), args.out)
    args.require_identical = True
    return _check_sweep(args, res, "l_sweep")


def cmd_table1(args) -> int:
    seeds = tuple(args.seed) if args.seed else (0,)
    mlp = MLPConfig(learning_rate=args.lr, max_iters=args.max_iters,
                    threshold=args.threshold if args.threshold is not None else 0.05)
    res = run_table1(_ints(args.ks), mlp, seeds=seeds, fail_fast=args.fail_fast)
    args.out.mkdir(parents=True, exist_ok=True)
    atomic_write(args.out / "table1.csv", res.to_csv())
    ordered = table1_ordered(res, len(seeds))
    lines = [f"k={p.value:<4g} converged_at={list(p.converged_at)} final_rel_l2={p.median_rel_l2:.4f}"
             for p in res.points]
    lines += [f"open: {n}" for n in res.open_points] + [f"strictly increasing over all seeds: {ordered}"]
    _emit(args, {**res.to_dict(), "ordered": ordered}, lines)
    return OK if ordered else MISMATCH


def cmd_ntk(args) -> int:
    mlp = MLPConfig(layer_sizes=(1, args.width, 1), seed=args.seed[0] if args.seed else 0)
    run = run_ntk_report(mlp, args.n_samples, args.out, n_modes=args.modes, decay_iters=args.decay_iters)
    s = run.summary
    ok = s["symmetry_residual"] < 1e-8 and s["top_mode_freq"] <= s["bottom10_median_freq"]
    _emit(args, {**s, "ok": ok}, [f"{k}: {v}" for k, v in s.items()] + [f"ok={ok}"])
    return OK if ok else MISMATCH


def cmd_paper_suite(args) -> int:
    seeds = tuple(args.seed) if args.seed else DEFAULT_SEEDS
    kw = {}
    if args.hidden is not None:
        kw["hidden"] = args.hidden
    if args.threshold is not None:
        kw["threshold"] = args.threshold
    runs = []
    for spec in paper_suite(seeds, **kw):
        runs.append(run_experiment(spec, args.out, plot=True))
        if not args.json:
            print(_run_line(runs[-1]), flush=True)
    bad = [r.spec.id for r in runs if not r.matches_expectation]
    summary = {"runs": [{"id": r.spec.id, "median_rel_l2": r.median_rel_l2, "verdict": r.verdict,
                         "expected": r.spec.expected} for r in runs], "mismatches": bad}
    atomic_write(args.out / "paper_suite.json", json.dumps(summary, indent=2))
    if args.json:
        print(json.dumps(summary, indent=2))
    else:
        print(f"{len(runs) - len(bad)}/{len(runs)} as expected" + (f"; mismatches: {', '.join(bad)}" if bad else ""))
    return MISMATCH if bad else OK


def cmd_plot(args) -> int:
    run = RunManifest.load(args.manifest)
    path = emit_plot(run, args.seed[0] if args.seed else None)
    atomic_write(Path(args.manifest), run.to_json())
    _emit(args, {"plot": str(path)}, [str(path)])
    return OK


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="spectral-elm",
                                     description="Spectral-bias experiments for extreme learning machines.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="one ELM experiment over all seeds")
    p.add_argument("--target", help="'multisine' or 'sine:<k>'")
    p.add_argument("--id")
    p.add_argument("--suggest-sd", action="store_true", help="set SD to the target's highest frequency")
    p.add_argument("--expect", choices=["captured", "not-captured"])
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep-sd", parents=[common], help="capture versus normal-init SD")
    p.add_argument("--sds", default="1,5,7,20,50")
    p.add_argument("--target")
    p.add_argument("--expect-verdicts", help="comma list, e.g. false,false,false,true,true")
    p.set_defaults(func=cmd_sweep_sd)

    p = sub.add_parser("sweep-l", parents=[common], help="capture and fit time versus hidden width")
    p.add_argument("--ls", default="400,800,1600")
    p.add_argument("--target")
    p.set_defaults(func=cmd_sweep_l)

    p = sub.add_parser("table1", parents=[common], help="gradient-descent iterations to convergence")
    p.add_argument("--ks", default="2,6,10")
    p.add_argument("--lr", type=float, default=MLPConfig.learning_rate)
    p.add_argument("--max-iters", type=int, default=MLPConfig.max_iters, help="per-run iteration budget")
    p.add_argument("--fail-fast", action="store_true", help="stop at the first non-converged run")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("ntk", parents=[common], help="empirical NTK spectrum and mode frequencies")
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--n-samples", type=int, default=128)
    p.add_argument("--modes", type=int, default=20)
    p.add_argument("--decay-iters", type=int, default=3000)
    p.set_defaults(func=cmd_ntk)

    p = sub.add_parser("paper-suite", parents=[common], help="every ELM figure scenario")
    p.set_defaults(func=cmd_paper_suite)

    p = sub.add_parser("plot", parents=[common], help="redraw plot.svg from a manifest")
    p.add_argument("manifest", type=Path)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - reported as exit status 2
        print(f"error: {exc}", file=sys.stderr)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())
