"""Command-line interface.

Subcommands:
  run     execute a sweep from a JSON config and/or a named preset
  fit     finite-size scaling fits from an emitted record file
  oracle  Haar Monte-Carlo cross-check of the analytic averages
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .correlators import brotoc_point, haar_mc_oracle, unregularized_bipartite
from .errors import ConfigError, DomainError, NumericalHealthError, ResourceLimitError, ValidationError
from .experiments import (
    ExperimentConfig,
    emit_records,
    fit_mean_records,
    fit_scaling,
    load_records,
    preset_config,
    run_experiment,
)
from .models import child_rng, sample_gue
from .thermal import ThermalContext

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_NUMERICAL = 4

ORACLE_Z_LIMIT = 5.0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brotoc",
        description="Bipartite regularized OTOC sweeps for exactly diagonalizable Hamiltonians.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured sweep and emit records")
    run.add_argument("--config", type=Path, help="JSON config file")
    run.add_argument("--preset", help="named built-in config (fig1-desk ... table1-desk)")
    run.add_argument("--serial", action="store_true", help="bit-exact sequential execution")
    run.add_argument("--seed", type=int, help="override the master seed")
    run.add_argument("--out", type=Path, help="output directory for the record file")
    run.add_argument("--workers", type=int, default=2, help="thread count when not --serial")

    fit = sub.add_parser("fit", help="scaling fits value = alpha * d^-gamma from records")
    fit.add_argument("--input", type=Path, required=True, help="record CSV/JSON from `run`")
    fit.add_argument("--k-last", type=int, default=5, help="fit through the last k sizes")

    oracle = sub.add_parser("oracle", help="Haar Monte-Carlo check against analytic averages")
    oracle.add_argument("--d", type=int, required=True, help="Hilbert space dimension")
    oracle.add_argument("--beta", type=float, required=True)
    oracle.add_argument("--t", type=float, required=True)
    oracle.add_argument("--samples", type=int, default=100000)
    oracle.add_argument("--seed", type=int, default=0)
    return parser


def _load_config(args) -> ExperimentConfig:
    if args.config is None and args.preset is None:
        raise ConfigError("provide --config and/or --preset")
    data = preset_config(args.preset).to_dict() if args.preset else None
    if args.config is not None:
        try:
            with open(args.config) as fh:
                overrides = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if data is None:
            data = overrides
        else:
            data.update(overrides)
    config = ExperimentConfig.from_dict(data)
    if args.seed is not None:
        config = dataclasses.replace(config, master_seed=args.seed)
    return config


def _cmd_run(args) -> int:
    config = _load_config(args)
    rows = run_experiment(config, serial=args.serial, workers=args.workers)
    out_path = Path(config.output.path)
    if args.out is not None:
        out_path = args.out / out_path.name
    written = emit_records(rows, out_path, config.output.format)
    n_mean = sum(1 for r in rows if r["realization"] == "mean")
    print(f"wrote {len(rows)} rows ({n_mean} mean rows) to {written}")
    for entry in fit_mean_records(rows, config.fit.k_last):
        fit = entry["fit"]
        print(
            f"fit {entry['model']:<16} beta={entry['beta']:<8} "
            f"gamma={fit.gamma:+.5f} log2_alpha={fit.log2_alpha:+.5f} "
            f"R^2={fit.r_squared:.5f} ({fit.points_used} pts)"
        )
    return EXIT_OK


def _cmd_fit(args) -> int:
    rows = load_records(args.input)
    groups: dict[tuple, list] = {}
    for row in rows:
        if row["realization"] != "mean" or row["L"] is None:
            continue
        groups.setdefault((row["model"], str(row["beta"])), []).append((row["L"], row["g_reg"]))
    if not groups:
        raise ConfigError("no mean rows with chain sizes found in the input")
    print(f"{'model':<16} {'beta':<10} {'gamma':>10} {'log2_alpha':>12} {'R^2':>9} pts")
    for (model, beta), points in sorted(groups.items()):
        if len(points) < args.k_last:
            print(f"{model:<16} {beta:<10} skipped: {len(points)} < k_last={args.k_last}")
            continue
        fit = fit_scaling(points, args.k_last)
        print(
            f"{model:<16} {beta:<10} {fit.gamma:>10.5f} {fit.log2_alpha:>12.5f} "
            f"{fit.r_squared:>9.5f} {fit.points_used:>3}"
        )
    return EXIT_OK


def _cmd_oracle(args) -> int:
    rng = child_rng(args.seed, 0)
    inst = sample_gue(args.d, rng)
    ctx = ThermalContext.create(inst.spectral, args.beta)
    part = inst.bipartition
    point = brotoc_point(ctx, args.t, part)
    g_unreg = unregularized_bipartite(ctx, args.t, part)
    mc = haar_mc_oracle(ctx, args.t, part, args.samples, rng)
    print(
        f"d={args.d} bipartition=({part.dim_a},{part.dim_b}) "
        f"beta={args.beta} t={args.t} samples={args.samples}"
    )
    print(f"{'quantity':<10} {'analytic':>14} {'monte-carlo':>14} {'stderr':>12} {'z':>7}")
    worst = 0.0
    for name, analytic, est in (
        ("g_disc", point.g_disc, mc.g_disc),
        ("g_reg", point.g_reg, mc.g_reg),
        ("g_unreg", g_unreg, mc.g_unreg),
    ):
        z = est.z_score(analytic)
        worst = max(worst, abs(z))
        print(f"{name:<10} {analytic:>14.8f} {est.mean:>14.8f} {est.stderr:>12.2e} {z:>+7.2f}")
    if worst > ORACLE_Z_LIMIT:
        print(f"FAIL: worst |z| = {worst:.2f} exceeds {ORACLE_Z_LIMIT}")
        return EXIT_NUMERICAL
    print(f"OK: worst |z| = {worst:.2f}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "fit": _cmd_fit, "oracle": _cmd_oracle}
    try:
        return handlers[args.command](args)
    except (ConfigError, ValidationError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceLimitError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except NumericalHealthError as exc:
        print(f"numerical-health failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
