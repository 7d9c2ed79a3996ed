"""Experiment protocol: level streams, periodic evaluation, metrics.

One experiment presents a fixed range of procedurally generated levels to
an eco-system and, every `eval_every` environments, measures the
adaptability index on a disjoint held-out range.  Multiple runs repeat
this with different pool RNG seeds over the same level schedule;
aggregation reports per-checkpoint means and standard errors.

Everything a run writes is a pure function of (config, run seed): no
timestamps or machine-dependent values appear in metrics, audit logs,
checkpoints, or charts.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .ecosystem import (
    DEFAULT_BUDGET,
    DEFAULT_THRESHOLD,
    EnvOutcome,
    Pool,
    Strategy,
    ecosystem_learn,
    make_pool,
    save_pool,
)
from .gridworld import GridConfig, Level, generate_level
from .ppo import PpoConfig, test_agent

logger = logging.getLogger(__name__)

METRICS = ("zeta", "pool_size", "cum_steps", "cum_tests", "failures")
METRICS_COLUMNS = ("envs_seen",) + METRICS


@dataclass(frozen=True)
class ExperimentConfig:
    """Key tree of the experiment config file; flags override any field."""

    strategy: Strategy
    n_train_envs: int = 500
    eval_every: int = 50
    n_eval_envs: int = 20
    train_seed_base: int = 0
    eval_seed_base: int = 1_000_000
    n_runs: int = 5
    threshold: float = DEFAULT_THRESHOLD
    budget: int = DEFAULT_BUDGET
    optimize_pool: bool = True
    zeta_mean_over_pool: bool = False
    grid: GridConfig = field(default_factory=GridConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    out_dir: str | None = None

    def validate(self) -> None:
        for key in ("n_train_envs", "eval_every", "n_eval_envs", "n_runs", "budget"):
            if getattr(self, key) < 1:
                raise ValueError(f"{key} must be >= 1, got {getattr(self, key)}")
        if self.n_train_envs % self.eval_every != 0:
            raise ValueError(
                f"eval_every ({self.eval_every}) must divide "
                f"n_train_envs ({self.n_train_envs})"
            )
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.train_seed_base < 0 or self.eval_seed_base < 0:
            raise ValueError("seed bases must be non-negative")
        train = range(self.train_seed_base, self.train_seed_base + self.n_train_envs)
        evals = range(self.eval_seed_base, self.eval_seed_base + self.n_eval_envs)
        if max(train.start, evals.start) < min(train.stop, evals.stop):
            raise ValueError(
                f"train and eval seed ranges overlap "
                f"([{train.start}, {train.stop}) vs [{evals.start}, {evals.stop}))"
            )

    def train_seeds(self) -> range:
        return range(self.train_seed_base, self.train_seed_base + self.n_train_envs)

    def eval_seeds(self) -> range:
        return range(self.eval_seed_base, self.eval_seed_base + self.n_eval_envs)


def config_to_json(cfg: ExperimentConfig) -> dict:
    data = asdict(cfg)
    data["strategy"] = cfg.strategy.value
    return data


def config_from_json(data: dict) -> ExperimentConfig:
    """Strict parse: unknown keys are errors naming the offending key."""
    known = {f.name for f in fields(ExperimentConfig)}
    for key in data:
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
    kwargs = dict(data)
    if "strategy" in kwargs:
        kwargs["strategy"] = Strategy(kwargs["strategy"])
    for section, cls in (("grid", GridConfig), ("ppo", PpoConfig)):
        if section in kwargs and isinstance(kwargs[section], dict):
            allowed = {f.name for f in fields(cls)}
            for key in kwargs[section]:
                if key not in allowed:
                    raise ValueError(f"unknown config key {section}.{key!r}")
            kwargs[section] = cls(**kwargs[section])
    cfg = ExperimentConfig(**kwargs)
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_json(data)


@dataclass(frozen=True)
class MetricsRecord:
    """One checkpoint row; cumulative counters never decrease within a run."""

    envs_seen: int
    zeta: float
    pool_size: int
    cum_steps: int
    cum_tests: int
    failures: int


@dataclass(frozen=True)
class AggregateRecord:
    envs_seen: int
    zeta_mean: float
    zeta_stderr: float
    pool_size_mean: float
    pool_size_stderr: float
    cum_steps_mean: float
    cum_steps_stderr: float
    cum_tests_mean: float
    cum_tests_stderr: float
    failures_mean: float
    failures_stderr: float


AGGREGATE_COLUMNS = ("envs_seen",) + tuple(
    f"{metric}_{stat}" for metric in METRICS for stat in ("mean", "stderr")
)


@dataclass
class RunResult:
    records: list[MetricsRecord]
    pool: Pool
    audit: list[dict]
    outcomes: list[EnvOutcome]


def adaptability_index(
    pool: Pool, eval_levels: list[Level], mean_over_pool: bool = False
) -> float:
    """Mean over held-out levels of the pool's per-level reward.

    Per level the eco-system's reward is the maximum over its agents'
    greedy test episodes (it solves environments through its best
    member); `mean_over_pool` switches to the average agent instead, for
    sensitivity analysis.  Evaluation is read-only: nothing in the pool
    changes, and the calls are not charged to the pool's test counter.
    An empty pool scores 0 on every level.
    """
    if not eval_levels:
        raise ValueError("eval_levels must be non-empty")
    total = 0.0
    for level in eval_levels:
        if not pool.agents:
            continue
        rewards = [test_agent(agent.params, level) for agent in pool.agents]
        total += max(rewards) if not mean_over_pool else sum(rewards) / len(rewards)
    return total / len(eval_levels)


def execute_run(
    cfg: ExperimentConfig,
    run_seed: int,
    on_record=None,
    on_env=None,
) -> RunResult:
    """One full experiment run; deterministic in (cfg, run_seed).

    `on_record` fires after each checkpoint row, `on_env` after each
    environment with (outcome, fresh audit events); both exist so
    callers can persist results as they appear.
    """
    cfg.validate()
    pool = make_pool(
        cfg.strategy, threshold=cfg.threshold, grid=cfg.grid, seed=run_seed
    )
    eval_levels = [generate_level(s, cfg.grid) for s in cfg.eval_seeds()]
    audit: list[dict] = []
    outcomes: list[EnvOutcome] = []
    records: list[MetricsRecord] = []
    cum_steps = 0
    failures = 0

    for i, seed in enumerate(cfg.train_seeds()):
        level = generate_level(seed, cfg.grid)
        mark = len(audit)
        pool, outcome = ecosystem_learn(
            pool,
            level,
            cfg.ppo,
            budget=cfg.budget,
            optimize=cfg.optimize_pool,
            audit=audit,
        )
        outcomes.append(outcome)
        cum_steps += outcome.training_steps_used
        failures += int(outcome.failed)
        if on_env is not None:
            on_env(outcome, audit[mark:])
        if (i + 1) % cfg.eval_every == 0:
            record = MetricsRecord(
                envs_seen=i + 1,
                zeta=adaptability_index(
                    pool, eval_levels, mean_over_pool=cfg.zeta_mean_over_pool
                ),
                pool_size=len(pool.agents),
                cum_steps=cum_steps,
                cum_tests=pool.tests_total,
                failures=failures,
            )
            records.append(record)
            if on_record is not None:
                on_record(record)
            logger.info(
                "run %d: %d envs seen, zeta=%.3f, pool=%d, steps=%d",
                run_seed,
                record.envs_seen,
                record.zeta,
                record.pool_size,
                record.cum_steps,
            )
    return RunResult(records=records, pool=pool, audit=audit, outcomes=outcomes)


def run_experiment(cfg: ExperimentConfig, run_seed: int) -> list[MetricsRecord]:
    """Checkpoint records of one run (see execute_run for the full result)."""
    return execute_run(cfg, run_seed).records


def run_to_dir(cfg: ExperimentConfig, run_seed: int, run_dir) -> RunResult:
    """Run one experiment, streaming partial results to disk as they appear.

    Writes metrics.csv row by row and audit.jsonl event by event, so an
    aborted run leaves every completed checkpoint behind; the pool
    checkpoint is saved on successful completion.
    """
    out = Path(run_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.csv", "w", newline="") as metrics_fh, open(
        out / "audit.jsonl", "w"
    ) as audit_fh:
        writer = csv.writer(metrics_fh)
        writer.writerow(METRICS_COLUMNS)
        metrics_fh.flush()

        def on_record(record: MetricsRecord) -> None:
            writer.writerow([getattr(record, c) for c in METRICS_COLUMNS])
            metrics_fh.flush()

        def on_env(outcome: EnvOutcome, events: list[dict]) -> None:
            for event in events:
                audit_fh.write(json.dumps(event) + "\n")
            audit_fh.flush()

        result = execute_run(cfg, run_seed, on_record=on_record, on_env=on_env)
    save_pool(result.pool, out / "pool")
    return result


def aggregate_runs(runs: list[list[MetricsRecord]]) -> list[AggregateRecord]:
    """Per-checkpoint mean and standard error (sample stddev / sqrt(n))."""
    if not runs:
        raise ValueError("no runs to aggregate")
    checkpoints = [r.envs_seen for r in runs[0]]
    for run in runs[1:]:
        if [r.envs_seen for r in run] != checkpoints:
            raise ValueError("runs disagree on envs_seen checkpoints")

    n = len(runs)
    out = []
    for idx, envs_seen in enumerate(checkpoints):
        kwargs: dict = {"envs_seen": envs_seen}
        for metric in METRICS:
            values = np.array(
                [getattr(run[idx], metric) for run in runs], dtype=np.float64
            )
            if np.all(values == values[0]):
                # identical runs must aggregate to exactly (value, 0)
                kwargs[f"{metric}_mean"] = float(values[0])
                kwargs[f"{metric}_stderr"] = 0.0
            else:
                kwargs[f"{metric}_mean"] = float(values.mean())
                kwargs[f"{metric}_stderr"] = float(values.std(ddof=1) / np.sqrt(n))
        out.append(AggregateRecord(**kwargs))
    return out


def _write_rows(path, columns, rows, fmt: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            if fmt == "csv":
                writer = csv.writer(fh)
                writer.writerow(columns)
                writer.writerows(rows)
            else:
                json.dump(
                    [dict(zip(columns, row)) for row in rows], fh, indent=2
                )
                fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def export_metrics(records: list[MetricsRecord], fmt: str, path) -> None:
    """One row per checkpoint; CSV uses '.' decimals and no separators."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    rows = [[getattr(r, c) for c in METRICS_COLUMNS] for r in records]
    _write_rows(path, METRICS_COLUMNS, rows, fmt)


def export_aggregate(records: list[AggregateRecord], fmt: str, path) -> None:
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    rows = [[getattr(r, c) for c in AGGREGATE_COLUMNS] for r in records]
    _write_rows(path, AGGREGATE_COLUMNS, rows, fmt)


_INT_COLUMNS = ("envs_seen", "pool_size", "cum_steps", "cum_tests", "failures")


def load_metrics(path) -> list[MetricsRecord]:
    """Inverse of export_metrics for both formats (by file extension)."""
    path = Path(path)
    if path.suffix == ".json":
        entries = json.loads(path.read_text())
    else:
        with open(path, newline="") as fh:
            entries = list(csv.DictReader(fh))
    records = []
    for entry in entries:
        records.append(
            MetricsRecord(
                **{
                    c: (int(entry[c]) if c in _INT_COLUMNS else float(entry[c]))
                    for c in METRICS_COLUMNS
                }
            )
        )
    return records


def _suite_worker(args) -> list[MetricsRecord]:
    cfg, run_seed, run_dir = args
    return run_to_dir(cfg, run_seed, run_dir).records


def run_suite(
    cfg: ExperimentConfig, out_dir, jobs: int = 1
) -> list[list[MetricsRecord]]:
    """All n_runs runs of one strategy, plus the aggregate file.

    Runs are independent (each owns its pool), so `jobs` > 1 fans them
    out over processes; results are identical either way.
    """
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [
        (cfg, run_seed, out / f"run_{run_seed:02d}") for run_seed in range(cfg.n_runs)
    ]
    if jobs > 1 and cfg.n_runs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_suite_worker, tasks))
    else:
        runs = [_suite_worker(task) for task in tasks]
    export_aggregate(aggregate_runs(runs), "csv", out / "aggregate.csv")
    return runs


def compare_suite(
    cfg: ExperimentConfig,
    strategies: list[Strategy],
    out_dir,
    jobs: int = 1,
) -> dict[Strategy, list[AggregateRecord]]:
    """The same seed schedule under each strategy, side by side.

    Emits per-strategy suites (runs + aggregate), a combined per-checkpoint
    table, and one chart per metric.
    """
    if len(strategies) < 2:
        raise ValueError("compare needs at least 2 strategies")
    out = Path(out_dir)
    aggregates: dict[Strategy, list[AggregateRecord]] = {}
    for strategy in strategies:
        sub_cfg = replace(cfg, strategy=strategy)
        runs = run_suite(sub_cfg, out / strategy.value, jobs=jobs)
        aggregates[strategy] = aggregate_runs(runs)

    columns = ["envs_seen"]
    for strategy in strategies:
        columns += [
            f"{strategy.value}_zeta",
            f"{strategy.value}_pool_size",
            f"{strategy.value}_cum_steps",
        ]
    first = aggregates[strategies[0]]
    rows = []
    for idx, agg in enumerate(first):
        row = [agg.envs_seen]
        for strategy in strategies:
            rec = aggregates[strategy][idx]
            row += [rec.zeta_mean, rec.pool_size_mean, rec.cum_steps_mean]
        rows.append(row)
    _write_rows(out / "compare.csv", columns, rows, "csv")
    write_metric_charts(
        {s.value: aggregates[s] for s in strategies}, out / "charts"
    )
    return aggregates


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
_CHART_W, _CHART_H = 640, 400
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 20, 24, 44


def write_metric_charts(by_strategy: dict[str, list[AggregateRecord]], out_dir) -> None:
    """One simple SVG line chart per metric (mean line, stderr whiskers)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for metric in METRICS:
        svg = _metric_chart_svg(metric, by_strategy)
        (out / f"{metric}.svg").write_text(svg)


def _metric_chart_svg(metric: str, by_strategy: dict[str, list[AggregateRecord]]) -> str:
    xs = sorted({r.envs_seen for recs in by_strategy.values() for r in recs})
    lo = min(
        getattr(r, f"{metric}_mean") - getattr(r, f"{metric}_stderr")
        for recs in by_strategy.values()
        for r in recs
    )
    hi = max(
        getattr(r, f"{metric}_mean") + getattr(r, f"{metric}_stderr")
        for recs in by_strategy.values()
        for r in recs
    )
    if hi == lo:
        hi, lo = hi + 1.0, lo - 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    x0, x1 = min(xs), max(xs)
    if x0 == x1:
        x0, x1 = x0 - 1, x1 + 1

    plot_w = _CHART_W - _MARGIN_L - _MARGIN_R
    plot_h = _CHART_H - _MARGIN_T - _MARGIN_B

    def sx(x):
        return _MARGIN_L + plot_w * (x - x0) / (x1 - x0)

    def sy(y):
        return _MARGIN_T + plot_h * (1.0 - (y - lo) / (hi - lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_CHART_W}" '
        f'height="{_CHART_H}" viewBox="0 0 {_CHART_W} {_CHART_H}">',
        f'<rect width="{_CHART_W}" height="{_CHART_H}" fill="white"/>',
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" x2="{_MARGIN_L}" '
        f'y2="{_CHART_H - _MARGIN_B}" stroke="black"/>',
        f'<line x1="{_MARGIN_L}" y1="{_CHART_H - _MARGIN_B}" '
        f'x2="{_CHART_W - _MARGIN_R}" y2="{_CHART_H - _MARGIN_B}" stroke="black"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        yv = lo + frac * (hi - lo)
        parts.append(
            f'<text x="{_MARGIN_L - 6}" y="{sy(yv):.1f}" font-size="11" '
            f'text-anchor="end" dominant-baseline="middle" '
            f'font-family="sans-serif">{yv:.3g}</text>'
        )
        xv = x0 + frac * (x1 - x0)
        parts.append(
            f'<text x="{sx(xv):.1f}" y="{_CHART_H - _MARGIN_B + 16}" font-size="11" '
            f'text-anchor="middle" font-family="sans-serif">{xv:.4g}</text>'
        )
    parts.append(
        f'<text x="{_MARGIN_L + plot_w / 2:.1f}" y="{_CHART_H - 8}" font-size="12" '
        f'text-anchor="middle" font-family="sans-serif">environments seen</text>'
    )
    parts.append(
        f'<text x="16" y="{_MARGIN_T + plot_h / 2:.1f}" font-size="12" '
        f'text-anchor="middle" font-family="sans-serif" '
        f'transform="rotate(-90 16 {_MARGIN_T + plot_h / 2:.1f})">{metric}</text>'
    )
    for i, (name, recs) in enumerate(by_strategy.items()):
        color = _PALETTE[i % len(_PALETTE)]
        points = " ".join(
            f"{sx(r.envs_seen):.1f},{sy(getattr(r, f'{metric}_mean')):.1f}"
            for r in recs
        )
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" '
            f'stroke-width="1.8"/>'
        )
        for r in recs:
            mean = getattr(r, f"{metric}_mean")
            err = getattr(r, f"{metric}_stderr")
            if err > 0:
                parts.append(
                    f'<line x1="{sx(r.envs_seen):.1f}" y1="{sy(mean - err):.1f}" '
                    f'x2="{sx(r.envs_seen):.1f}" y2="{sy(mean + err):.1f}" '
                    f'stroke="{color}" stroke-width="1"/>'
                )
        parts.append(
            f'<text x="{_CHART_W - _MARGIN_R - 8}" y="{_MARGIN_T + 14 + 16 * i}" '
            f'font-size="12" text-anchor="end" font-family="sans-serif" '
            f'fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
