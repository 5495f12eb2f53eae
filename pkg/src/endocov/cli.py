"""Command line interface: simulate, estimate, experiment."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .bias import EstimationError, estimate
from .experiment import (
    ExperimentConfig,
    RunFailure,
    run_experiment,
    run_replication,
    replication_seed,
)
from .sampling import generate_observations
from .simulate import simulate_path, true_integrated_covariation

EXIT_USAGE = 2
EXIT_FAILURE = 1


def _block_size(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"block size must be an integer, got {text!r}")
    if value < 2:
        raise argparse.ArgumentTypeError(f"block size must be >= 2, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="endocov",
        description="Covariation estimation for asynchronously, endogenously sampled prices",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate one path and its observation series")
    sim.add_argument("--config", required=True, help="experiment config JSON")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, default=None, help="override the base seed")
    sim.add_argument("--alpha", type=float, default=None, help="override the tick scale")
    sim.add_argument("--dt-steps", type=int, default=None,
                     help="grid steps per shortest expected duration")

    est = sub.add_parser("estimate", help="estimate covariation from two tick files")
    est.add_argument("ticks1", help="tick CSV of asset 1 (time,price)")
    est.add_argument("ticks2", help="tick CSV of asset 2 (time,price)")
    est.add_argument("--h", type=_block_size, default=None, help="block size (>= 2)")
    est.add_argument("--t", type=float, default=1.0, help="evaluation time (exclusive)")
    est.add_argument("--truth", type=float, default=None,
                     help="known integrated covariation; adds the standardized statistic")

    exp = sub.add_parser("experiment", help="run a replicated experiment")
    exp.add_argument("--config", required=True, help="experiment config JSON")
    exp.add_argument("--out", required=True, help="output directory")
    exp.add_argument("--reps", type=int, default=None, help="override replication count")
    exp.add_argument("--seed", type=int, default=None, help="override the base seed")
    exp.add_argument("--alpha", type=float, default=None, help="override the tick scale")
    exp.add_argument("--dt-steps", type=int, default=None,
                     help="grid steps per shortest expected duration")
    exp.add_argument("--h", type=_block_size, default=None, help="block size (>= 2)")
    return parser


def _load_config(path: str, args) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        print(f"error: config file not found: {p}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        print(f"error: {p}: invalid JSON at line {exc.lineno}: {exc.msg}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    try:
        cfg = ExperimentConfig.from_json(doc)
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: {p}: invalid config: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    from dataclasses import replace

    overrides = {}
    if getattr(args, "reps", None) is not None:
        overrides["replications"] = args.reps
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.alpha is not None:
        overrides["alpha"] = args.alpha
    if getattr(args, "dt_steps", None) is not None:
        overrides["dt_steps"] = args.dt_steps
    if getattr(args, "h", None) is not None:
        overrides["h"] = args.h
    if overrides:
        cfg = replace(cfg, **overrides)
    try:
        cfg.validate()
    except ValueError as exc:
        print(f"error: {p}: invalid config: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ss = replication_seed(cfg.base_seed, 0)
    sim_ss, samp1_ss, samp2_ss = ss.spawn(3)
    dt = cfg.grid_step()
    path = simulate_path(cfg.diffusion, cfg.horizon, dt, sim_ss)
    obs = []
    for asset, samp_ss in ((1, samp1_ss), (2, samp2_ss)):
        series = generate_observations(
            path, cfg.boundary, asset, cfg.alpha,
            rng=np.random.Generator(np.random.PCG64DXSM(samp_ss)),
        )
        io.write_observations(series, out / f"observations_asset{asset}.csv")
        obs.append(series)
    summary = {
        "dt": dt,
        "n_grid_steps": path.n_steps,
        "horizon": cfg.horizon,
        "true_integrated_covariation": true_integrated_covariation(path, cfg.horizon),
        "terminal_values": [float(v) for v in path.values[-1]],
        "n_observations": [obs[0].n_events, obs[1].n_events],
        "n_jumps": len(path.jump_marks),
    }
    (out / "path_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(str(out))
    return 0


def cmd_estimate(args) -> int:
    for name in (args.ticks1, args.ticks2):
        if not Path(name).exists():
            print(f"error: tick file not found: {name}", file=sys.stderr)
            return EXIT_USAGE
    try:
        obs1 = io.read_ticks(args.ticks1)
        obs2 = io.read_ticks(args.ticks2)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report = estimate(obs1, obs2, t=args.t, h=args.h, truth=args.truth)
    except EstimationError as exc:
        print(f"error: estimation failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(report.to_json_str())
    return 0


def cmd_experiment(args) -> int:
    cfg = _load_config(args.config, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(done: int, total: int) -> None:
        if done == total or done % 50 == 0:
            print(f"replication {done}/{total}", file=sys.stderr)

    try:
        result = run_experiment(cfg, progress=progress)
    except RunFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    io.write_replications(result, out / "replications.csv")
    io.write_summary(result, out / "summary.json")
    stats = [r.statistic for r in result.successful()]
    io.write_histogram(stats, out / "histogram.csv")
    print(str(out))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate":
        return cmd_simulate(args)
    if args.command == "estimate":
        return cmd_estimate(args)
    if args.command == "experiment":
        return cmd_experiment(args)
    parser.error(f"unknown command {args.command!r}")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
