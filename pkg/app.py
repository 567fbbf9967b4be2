"""
Hadaptive - Command Line Entry Point

Subcommands:
- grad-check: finite-difference checks of every backward pass
- train-demo: selection demo on the synthetic dataset, with ablations
- bench-kernels: timed cross-Hadamard dispatch strategies
- cost-model: static parameter / FLOP accounting and ratio curves
- pair-map: pair index <-> channel pair lookups
- report-all: curves, pair maps, benchmarks and a manifest in one directory
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from engine.exceptions import HadaptiveError
from kernels.benchmark import benchmark_grid, format_dt, heatmap_rows, parse_grid
from kernels.pairing import index_from_pair, num_pairs, pair_from_index
from kernels.scheduler import default_workers
from costs.formulas import CURVE_COLUMNS, curve_rows, ratio_curves
from costs.report import REPORT_COLUMNS, model_report, report_rows
from harness import (
    ProjectConfig,
    TAU_SCHEDULES,
    VARIANTS,
    bench_rows,
    converges_no_slower,
    load_config,
    pairmap_rows,
    report_all,
    run_suite,
    seed_sweep,
    train_demo,
    write_csv,
    write_json,
)
from harness.bundle import BENCH_COLUMNS, PAIRMAP_COLUMNS
from harness.gradcheck_suite import REPORT_COLUMNS as GRADCHECK_COLUMNS
from harness.gradcheck_suite import SCOPES

logger = logging.getLogger("hadaptive")

DEFAULT_ARCH = Path(__file__).resolve().parent / "configs" / "hadaptive_s.spec"


# ============================================================================
# Commands
# ============================================================================

def cmd_grad_check(args, cfg: ProjectConfig) -> int:
    out = Path(cfg.run.out_dir)
    print(f"🔍 Gradient checks ({args.scope}, {cfg.engine.dtype})...")
    report = run_suite(args.scope, cfg.gradcheck, dtype=cfg.engine.dtype, base_seed=cfg.run.seed,
                       names=args.check)
    path = write_csv(out / "gradcheck.csv", GRADCHECK_COLUMNS, report.rows(), seed=cfg.run.seed,
                     notes=[f"scope={args.scope} dtype={report.dtype} tol={report.tol:g}"])
    if report.passed:
        print(f"✅ {len(report.results)} checks passed ({path})")
        return 0
    for name, result in report.failures:
        print(f"❌ {name} seed={result.seed} max_rel_error={result.max_rel_error:.3e} ({result.worst_tensor()})")
    print(f"❌ {len(report.failures)} of {len(report.results)} checks failed ({path})")
    return 1


def cmd_train_demo(args, cfg: ProjectConfig) -> int:
    out = Path(cfg.run.out_dir)
    if args.seeds:
        seeds = list(range(cfg.run.seed, cfg.run.seed + args.seeds))
        print(f"🎲 Paired seed sweep over {len(seeds)} seeds...")
        sweep = seed_sweep(cfg, seeds)
        learnable, fixed = sweep["learnable"], sweep["fixed"]
        found = sum(r.found_informative() for r in learnable)
        reached = sum(r.epochs_to_target is not None for r in learnable)
        no_slower = sum(converges_no_slower(a, b) for a, b in zip(learnable, fixed))
        write_json(out / "sweep.json", {
            "seeds": seeds,
            "reached_target": reached,
            "found_informative": found,
            "learnable_no_slower_than_fixed": no_slower,
            "epochs_to_target": {v: [r.epochs_to_target for r in runs] for v, runs in sweep.items()},
        })
        print(f"📊 target reached {reached}/{len(seeds)}, informative channels found {found}/{len(seeds)}, "
              f"learnable no slower than fixed {no_slower}/{len(seeds)}")
        return 0

    variants = args.variants or None
    print(f"🏋️ Training demo (seed={cfg.run.seed}, epochs={cfg.run.epochs}, tau={cfg.run.tau_schedule})...")
    report = train_demo(cfg, variants=variants, out_dir=out)
    for r in report.runs:
        target = r.epochs_to_target
        print(f"   {r.variant:<10} eval_acc={r.final_accuracy:.3f} "
              f"target@{target if target is not None else '-'} channels={r.dominant_channels() if r.histograms else []}")
    print(f"✅ Metrics written to {report.files['metrics']}")
    return 0


def cmd_bench_kernels(args, cfg: ProjectConfig) -> int:
    sched = cfg.scheduler
    out = Path(cfg.run.out_dir)
    grid = parse_grid(args.grid or sched.grid)
    workers = sched.workers or default_workers()
    repeats = args.repeats or sched.repeats
    strategies = args.strategies or sched.strategies
    print(f"⏱️ Benchmarking {', '.join(strategies)} on {workers} workers...")
    records = benchmark_grid(grid, strategies=strategies, repeats=repeats, warmups=sched.warmups,
                             workers=workers, seed=cfg.run.seed,
                             memory_cap_bytes=sched.memory_cap_mb * 1024 * 1024)
    write_csv(out / "bench.csv", BENCH_COLUMNS, bench_rows(records), seed=cfg.run.seed,
              notes=[f"workers={workers}", f"repeats={repeats}"])
    if "direct" in strategies and "parity" in strategies:
        cells = heatmap_rows(records)
        write_csv(out / "heatmap.csv", ["batch", "channels", "spatial", "direct_vs_parity"],
                  [[c.batch, c.channels, c.spatial, f"{c.value:.6f}"] for c in cells], seed=cfg.run.seed,
                  notes=["CPU thread-pool timings; GPU cache crossovers will differ"])
    for r in records:
        if not r.skipped:
            print(f"   {r.strategy:<7} b={r.batch:<3} c={r.channels:<4} s={r.spatial:<4} {format_dt(r.median_s)}")
    print(f"✅ {len(records)} records written to {out / 'bench.csv'}")
    return 0


def cmd_cost_model(args, cfg: ProjectConfig) -> int:
    out = Path(cfg.run.out_dir)
    if args.curves:
        modes = ["channels", "ratio"] if args.curves == "both" else [args.curves]
        points = [p for mode in modes for p in ratio_curves(mode, f=args.input)]
        path = write_csv(out / "curves.csv", CURVE_COLUMNS, curve_rows(points), seed=cfg.run.seed)
        print(f"📈 {len(points)} curve points written to {path}")
        return 0

    report = model_report(args.arch, input_size=args.input)
    path = write_csv(out / "cost_report.csv", REPORT_COLUMNS, report_rows(report), seed=cfg.run.seed,
                     notes=[f"arch={report.name} input={report.input_size}"])
    print(f"📐 {report.name} @ {report.input_size}x{report.input_size}: "
          f"{report.total_params / 1e6:.2f}M params, {report.total_macs / 1e6:.1f}M MACs, "
          f"{report.total_flops / 1e6:.1f}M FLOPs")
    print(f"✅ Report written to {path}")
    return 0


def cmd_pair_map(args, cfg: ProjectConfig) -> int:
    if args.all:
        path = write_csv(Path(cfg.run.out_dir) / "pairmap.csv", PAIRMAP_COLUMNS, pairmap_rows([args.n]),
                         seed=cfg.run.seed)
        print(f"🗺️ {num_pairs(args.n)} pairs of {args.n} channels written to {path}")
    elif args.pair is not None:
        i, j = args.pair
        print(f"({i}, {j}) -> {index_from_pair(i, j, args.n)}")
    else:
        p = args.p if args.p is not None else 0
        i, j = pair_from_index(p, args.n)
        print(f"{p} -> ({i}, {j})")
    return 0


def cmd_report_all(args, cfg: ProjectConfig) -> int:
    print(f"📦 Building report bundle in {cfg.run.out_dir}...")
    bundle = report_all(cfg)
    for name, path in bundle.files.items():
        print(f"   {name}: {path}")
    if not bundle.ok:
        for name, message in bundle.failures.items():
            print(f"❌ {name}: {message}")
        return 1
    print("✅ Bundle complete")
    return 0


# ============================================================================
# Parser
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Seed for data, init, noise and projections")
    common.add_argument("--dtype", choices=["f32", "f64"], default=None, help="Forward precision")
    common.add_argument("--workers", type=int, default=None, help="Worker threads for kernel dispatch")
    common.add_argument("--out", default=None, help="Output directory")
    common.add_argument("--config", default=None, help="Config file (default: config.yaml)")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(prog="hadaptive", description="Adaptive cross-Hadamard toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grad-check", parents=[common], help="Finite-difference gradient checks")
    p.add_argument("--scope", choices=SCOPES, default="all")
    p.add_argument("--check", action="append", default=None, help="Run only this check (repeatable)")
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("train-demo", parents=[common], help="Train the selection demo")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--tau-schedule", choices=TAU_SCHEDULES, default=None)
    p.add_argument("--variants", nargs="+", choices=list(VARIANTS), default=None)
    p.add_argument("--no-ablations", action="store_true", help="Train only the learnable variant")
    p.add_argument("--seeds", type=int, default=0, help="Paired learnable/fixed sweep over this many seeds")
    p.set_defaults(func=cmd_train_demo)

    p = sub.add_parser("bench-kernels", parents=[common], help="Time the dispatch strategies")
    p.add_argument("--grid", nargs="+", default=None, help="Axes as name=a,b or name=lo..hi")
    p.add_argument("--strategies", nargs="+", choices=["naive", "direct", "parity"], default=None)
    p.add_argument("--repeats", type=int, default=None)
    p.set_defaults(func=cmd_bench_kernels)

    p = sub.add_parser("cost-model", parents=[common], help="Parameter and FLOP accounting")
    p.add_argument("--arch", default=str(DEFAULT_ARCH), help="Architecture spec file")
    p.add_argument("--input", type=int, default=224, help="Input resolution")
    p.add_argument("--curves", choices=["channels", "ratio", "both"], default=None,
                   help="Emit expansion ratio curves instead of a model report")
    p.set_defaults(func=cmd_cost_model)

    p = sub.add_parser("pair-map", parents=[common], help="Pair index lookups")
    p.add_argument("--n", type=int, required=True, help="Channel count")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--p", type=int, default=None, help="Pair index to decode")
    group.add_argument("--pair", type=int, nargs=2, metavar=("I", "J"), default=None, help="Pair to encode")
    group.add_argument("--all", action="store_true", help="Write the whole map as CSV")
    p.set_defaults(func=cmd_pair_map)

    p = sub.add_parser("report-all", parents=[common], help="Curves, pair maps, benchmarks and manifest")
    p.set_defaults(func=cmd_report_all)
    return parser


def resolve_config(args) -> ProjectConfig:
    cfg = load_config(args.config).with_overrides(seed=args.seed, dtype=args.dtype,
                                                  workers=args.workers, out=args.out)
    if args.command == "train-demo":
        run = cfg.run
        updates = {}
        if args.epochs is not None:
            updates["epochs"] = args.epochs
        if args.samples is not None:
            updates["samples"] = args.samples
        if args.tau_schedule is not None:
            updates["tau_schedule"] = args.tau_schedule
        if args.no_ablations:
            updates["ablations"] = False
        cfg = replace(cfg, run=replace(run, **updates))
    return cfg


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        level=logging.DEBUG if args.verbose else logging.INFO,
    )
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except HadaptiveError as e:
        logger.debug("%s failed", args.command, exc_info=True)
        print(f"❌ Error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
