"""Command-line entry point: ``d2dcran {thresholds,simulate,sweep,validate,iterate}``."""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, SystemConfig, load_config
from .experiments import (
    CLI_MODES,
    DEFAULT_TRIALS,
    SWEEP_PRESETS,
    Dataset,
    SWEEP_COLUMNS,
    SweepSpec,
    analytic_rows,
    iteration_dataset,
    run_sweep,
    simulate_dataset,
    thresholds_for_mode,
    validate_thinning,
    dataset_meta,
)
from .threshold import InfeasibleThresholds

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 2, 3


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _pairs(text: str) -> list[tuple[float, float]]:
    out = []
    for item in text.split(";"):
        if item.strip():
            a, b = _floats(item)
            out.append((a, b))
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="d2dcran", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file (defaults when omitted)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    common.add_argument("--mode", choices=sorted(CLI_MODES), default="worst")
    common.add_argument("--out", help="output CSV path (stdout when omitted)")
    common.add_argument("--workers", type=int, default=1, help="threads used for trials")
    common.add_argument("--receivers", type=int, default=50,
                        help="SIR receivers sampled per band per trial")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("thresholds", parents=[common], help="print thresholds and power scales")
    sub.add_parser("simulate", parents=[common], help="single-point simulation statistics")
    sweep = sub.add_parser("sweep", parents=[common], help="parameter sweep")
    sweep.add_argument("--preset", choices=sorted(SWEEP_PRESETS), help="preset sweep (all its modes)")
    sweep.add_argument("--param", help="SystemConfig field to sweep")
    sweep.add_argument("--grid", type=_floats, help="comma-separated sorted values")
    validate = sub.add_parser("validate", parents=[common], help="thinning validation curves")
    validate.add_argument("--d-grid", type=_pairs, default=[(20.0, 40.0)],
                          help="';'-separated 'd_ou,d_ol' pairs in metres")
    iterate = sub.add_parser("iterate", parents=[common], help="iterative threshold refinement trace")
    iterate.add_argument("--tol", type=float, default=1e-3)
    iterate.add_argument("--max-iter", type=int, default=20)
    return parser


def _emit(ds: Dataset, out: str | None) -> None:
    if out:
        ds.write(out)
    else:
        sys.stdout.write(ds.to_text())


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else SystemConfig()
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    mode = CLI_MODES[args.mode]
    receivers = None if args.receivers < 0 else args.receivers

    try:
        if args.command == "thresholds":
            thr = thresholds_for_mode(cfg, mode, trials=args.trials, seed=args.seed, workers=args.workers)
            ds = Dataset(("metric", "value"), meta=dataset_meta(cfg, "thresholds"))
            ds.rows = list(analytic_rows(cfg, thr))
            ds.rows += [("moment_outband", thr.mean_pow_moment_ou), ("moment_overlay", thr.mean_pow_moment_ol)]
            _emit(ds, args.out)
        elif args.command == "simulate":
            ds = simulate_dataset(cfg, mode, args.trials, args.seed, args.workers, receivers)
            _emit(ds, args.out)
            if any(r[3] == "infeasible" for r in ds.rows):
                return EXIT_INFEASIBLE
        elif args.command == "sweep":
            if args.preset:
                param, grid, modes = SWEEP_PRESETS[args.preset]
            else:
                if not (args.param and args.grid):
                    print("sweep needs --preset or both --param and --grid", file=sys.stderr)
                    return EXIT_CONFIG
                param, grid, modes = args.param, args.grid, (mode,)
            ds = Dataset(SWEEP_COLUMNS)
            for m in modes:
                try:
                    spec = SweepSpec(param, tuple(grid), m, args.trials, args.seed)
                except ValueError as exc:
                    print(f"config error: {exc}", file=sys.stderr)
                    return EXIT_CONFIG
                part = run_sweep(spec, cfg, args.workers, receivers)
                ds.meta = part.meta
                ds.rows += part.rows
            _emit(ds, args.out)
        elif args.command == "validate":
            ds = validate_thinning(cfg, args.d_grid, args.trials, args.seed, workers=args.workers,
                                   max_receivers=receivers)
            _emit(ds, args.out)
        elif args.command == "iterate":
            ds, thr = iteration_dataset(cfg, args.trials, args.seed, args.tol, args.max_iter, args.workers)
            _emit(ds, args.out)
    except InfeasibleThresholds as exc:
        print(f"infeasible thresholds: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
