"""Command line front end.

Exit codes: 0 on success, 2 on usage or config errors, 1 on runtime
failures.  The default output root is ./runs, overridable with the
ECOPOOL_OUT environment variable; --out and the config's out_dir take
precedence over both.  Output files carry no wall-clock values; the
per-experiment run.log sidecar is the only place timestamps appear.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .ecosystem import Strategy
from .gridworld import GridConfig, generate_level, level_to_json, render_ascii, reset
from .harness import (
    METRICS_COLUMNS,
    ExperimentConfig,
    compare_suite,
    config_to_json,
    export_metrics,
    load_config,
    load_metrics,
    run_suite,
)

_STRATEGY_NAMES = [s.value for s in Strategy]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecopool",
        description="Grow a pool of gridworld specialists over generated levels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one strategy over a level range")
    _add_experiment_flags(run_p)
    run_p.add_argument("--strategy", choices=_STRATEGY_NAMES, help="agent init strategy")
    run_p.set_defaults(func=cmd_run)

    cmp_p = sub.add_parser(
        "compare", help="run several strategies over the same level schedule"
    )
    _add_experiment_flags(cmp_p)
    cmp_p.add_argument(
        "--strategy",
        choices=_STRATEGY_NAMES,
        action="append",
        dest="strategies",
        help="strategy to include (give at least twice)",
    )
    cmp_p.set_defaults(func=cmd_compare)

    show_p = sub.add_parser("show-env", help="render one generated level")
    show_p.add_argument("seed", type=int, help="level seed")
    show_p.add_argument("--config", help="config file supplying the grid shape")
    show_p.add_argument("--json", action="store_true", help="emit only the level JSON")
    show_p.set_defaults(func=cmd_show_env)

    insp_p = sub.add_parser("inspect-pool", help="summarize a pool checkpoint")
    insp_p.add_argument("checkpoint", help="checkpoint directory (or pool.json)")
    insp_p.add_argument("--json", action="store_true", help="emit the raw manifest")
    insp_p.set_defaults(func=cmd_inspect_pool)

    exp_p = sub.add_parser("export", help="re-emit run metrics in another format")
    exp_p.add_argument("run_dir", help="run directory containing metrics.csv")
    exp_p.add_argument("--format", choices=("csv", "json"), default="json")
    exp_p.add_argument("--out", help="output file (default: stdout)")
    exp_p.set_defaults(func=cmd_export)

    return parser


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="experiment config file (JSON)")
    parser.add_argument("--envs", type=int, help="override n_train_envs")
    parser.add_argument("--runs", type=int, help="override n_runs")
    parser.add_argument("--eval-every", type=int, help="override eval cadence")
    parser.add_argument("--budget", type=int, help="override training budget")
    parser.add_argument("--jobs", type=int, default=1, help="parallel run workers")
    parser.add_argument("--out", help="output directory")


def _resolve_config(args, strategy: Strategy | None) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
    elif strategy is not None:
        cfg = ExperimentConfig(strategy=strategy)
    else:
        raise ValueError("either --config or --strategy is required")
    overrides: dict = {}
    if strategy is not None:
        overrides["strategy"] = strategy
    if args.envs is not None:
        overrides["n_train_envs"] = args.envs
    if args.runs is not None:
        overrides["n_runs"] = args.runs
    if args.eval_every is not None:
        overrides["eval_every"] = args.eval_every
    if args.budget is not None:
        overrides["budget"] = args.budget
    if overrides:
        cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def _resolve_out(args, cfg: ExperimentConfig, default_name: str) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.out_dir:
        return Path(cfg.out_dir)
    return Path(os.environ.get("ECOPOOL_OUT", "runs")) / default_name


def _run_log(out_dir: Path) -> logging.Handler:
    """Sidecar log; the one output where timestamps are allowed."""
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out_dir / "run.log")
    handler.setFormatter(
        logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
    )
    pkg_logger = logging.getLogger("ecopool")
    pkg_logger.setLevel(logging.INFO)
    pkg_logger.addHandler(handler)
    return handler


def _write_config(cfg: ExperimentConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(
        json.dumps(config_to_json(cfg), indent=2) + "\n"
    )


def cmd_run(args) -> int:
    strategy = Strategy(args.strategy) if args.strategy else None
    cfg = _resolve_config(args, strategy)
    out = _resolve_out(args, cfg, f"run-{cfg.strategy.value}")
    _write_config(cfg, out)
    handler = _run_log(out)
    try:
        runs = run_suite(cfg, out, jobs=args.jobs)
    finally:
        logging.getLogger("ecopool").removeHandler(handler)
        handler.close()
    for run_seed, records in enumerate(runs):
        final = records[-1]
        print(
            f"run {run_seed}: zeta={final.zeta:.4f} pool={final.pool_size} "
            f"steps={final.cum_steps} failures={final.failures}"
        )
    print(f"wrote {out}")
    return 0


def cmd_compare(args) -> int:
    strategies = [Strategy(s) for s in args.strategies or []]
    if len(strategies) < 2:
        raise ValueError("compare needs at least 2 strategies (repeat --strategy)")
    cfg = _resolve_config(args, strategies[0])
    name = "compare-" + "-".join(s.value for s in strategies)
    out = _resolve_out(args, cfg, name)
    _write_config(cfg, out)
    handler = _run_log(out)
    try:
        aggregates = compare_suite(cfg, strategies, out, jobs=args.jobs)
    finally:
        logging.getLogger("ecopool").removeHandler(handler)
        handler.close()
    for strategy in strategies:
        final = aggregates[strategy][-1]
        print(
            f"{strategy.value}: zeta={final.zeta_mean:.4f} "
            f"pool={final.pool_size_mean:.1f} steps={final.cum_steps_mean:.0f}"
        )
    print(f"wrote {out}")
    return 0


def cmd_show_env(args) -> int:
    grid = load_config(args.config).grid if args.config else GridConfig()
    level = generate_level(args.seed, grid)
    data = level_to_json(level)
    if args.json:
        print(json.dumps(data, indent=2))
        return 0
    state, _ = reset(level)
    print(render_ascii(state))
    print(json.dumps(data, indent=2))
    return 0


def cmd_inspect_pool(args) -> int:
    root = Path(args.checkpoint)
    manifest_path = root / "pool.json" if root.is_dir() else root
    if not manifest_path.exists():
        raise ValueError(f"no pool checkpoint at {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    if args.json:
        print(json.dumps(manifest, indent=2))
        return 0
    grid = manifest["grid"]
    print(f"strategy:  {manifest['strategy']}")
    print(f"threshold: {manifest['threshold']}")
    print(f"grid:      {grid['width']}x{grid['height']}, {grid['max_steps']} steps")
    print(f"agents:    {len(manifest['agents'])}")
    print(f"main:      {'yes' if manifest['main_agent_ref'] else 'no'}")
    for agent in manifest["agents"]:
        solved = agent["solved"]
        shown = ", ".join(str(s) for s in solved[:8])
        if len(solved) > 8:
            shown += ", ..."
        print(
            f"  agent {agent['id']}: {len(solved)} solved [{shown}] "
            f"(born on {agent['birth_env']})"
        )
    return 0


def cmd_export(args) -> int:
    metrics_path = Path(args.run_dir) / "metrics.csv"
    if not metrics_path.exists():
        raise ValueError(f"no metrics at {metrics_path}")
    records = load_metrics(metrics_path)
    if args.out:
        export_metrics(records, args.format, args.out)
        print(f"wrote {args.out}")
        return 0
    if args.format == "json":
        print(json.dumps([asdict(r) for r in records], indent=2))
    else:
        writer = csv.writer(sys.stdout)
        writer.writerow(METRICS_COLUMNS)
        for record in records:
            writer.writerow([getattr(record, c) for c in METRICS_COLUMNS])
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
