"""Pool of specialist agents grown over a stream of levels.

For each incoming level the pool is scanned for an agent that already
solves it (greedy test reward at or above the threshold).  If none does,
a new agent is created by the pool's initialization strategy, trained
until it solves the level or a budget runs out, then inserted.  An
optional optimization pass lets the new agent absorb environments other
agents solve and removes agents whose solved-set it covers; the pool is
kept sorted by solved-set size so the broadest specialist is scanned
first.

Solved-sets store level seeds, not levels: levels are regenerated on
demand from the pool's grid config, which is exact by determinism.
The pool is single-writer; `ecosystem_learn` owns it for the duration
of one environment.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .gridworld import GridConfig, Level, generate_level
from .policy import (
    Adam,
    PolicyParams,
    clone_params,
    init_params,
    params_from_json,
    params_to_json,
)
from .ppo import PpoConfig, learn_epoch, test_agent

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.8
DEFAULT_BUDGET = 300


class Strategy(str, Enum):
    """How a new agent's weights are initialized."""

    BASIC = "basic"      # fresh random weights
    RANDOM = "random"    # copy of a uniformly chosen pool agent
    BEST = "best"        # copy of the best scorer from the pool scan
    FORKED = "forked"    # copy of the main agent held outside the pool


@dataclass
class Agent:
    """One specialist: its weights and the level seeds credited to it."""

    id: int
    params: PolicyParams
    solved: list[int]
    birth_env: int


@dataclass
class Pool:
    strategy: Strategy
    threshold: float
    grid: GridConfig
    rng: np.random.Generator
    agents: list[Agent] = field(default_factory=list)
    main_agent: PolicyParams | None = None
    next_id: int = 0
    tests_total: int = 0


def make_pool(
    strategy: Strategy,
    threshold: float = DEFAULT_THRESHOLD,
    grid: GridConfig = GridConfig(),
    seed: int = 0,
) -> Pool:
    """Empty pool; under the forked strategy the main agent is born here."""
    rng = np.random.default_rng(seed)
    pool = Pool(strategy=Strategy(strategy), threshold=threshold, grid=grid, rng=rng)
    if pool.strategy is Strategy.FORKED:
        pool.main_agent = init_params(int(rng.integers(2**63)))
    return pool


@dataclass(frozen=True)
class FindResult:
    solver: int | None
    solver_reward: float | None
    best_id: int | None
    best_reward: float | None
    tests_run: int


@dataclass(frozen=True)
class TrainResult:
    agent: Agent
    epochs_used: int
    steps_used: int
    failed: bool
    final_reward: float
    tests_run: int


@dataclass(frozen=True)
class EnvOutcome:
    """Bookkeeping for one environment presented to the eco-system."""

    level_seed: int
    solved_by: int | None
    created_new: bool
    training_steps_used: int
    epochs_used: int
    failed: bool
    tests_run: int
    credit_reward: float | None


def find_best_agent(pool: Pool, level: Level) -> FindResult:
    """Scan the pool in order, one greedy test episode per agent.

    The solver is the first agent whose reward meets the threshold; the
    best is the first agent achieving the maximum reward seen.  All
    strategies stop the scan at the solver except Best, which keeps
    scanning so its copy source reflects the whole pool.
    """
    solver = None
    solver_reward = None
    best_id = None
    best_reward = None
    tests = 0
    for agent in pool.agents:
        reward = test_agent(agent.params, level)
        tests += 1
        if best_reward is None or reward > best_reward:
            best_id, best_reward = agent.id, reward
        if reward >= pool.threshold and solver is None:
            solver, solver_reward = agent.id, reward
            if pool.strategy is not Strategy.BEST:
                break
    return FindResult(
        solver=solver,
        solver_reward=solver_reward,
        best_id=best_id,
        best_reward=best_reward,
        tests_run=tests,
    )


def initialize_agent(
    pool: Pool, best_id: int | None, rng: np.random.Generator
) -> Agent:
    """New agent with weights chosen by the pool's strategy.

    Degenerate cases (no pool agent to copy from) fall back to fresh
    random weights and are logged.
    """
    strategy = pool.strategy
    params = None
    if strategy is Strategy.RANDOM and pool.agents:
        source = pool.agents[int(rng.integers(len(pool.agents)))]
        params = clone_params(source.params)
    elif strategy is Strategy.BEST and best_id is not None:
        source = next(a for a in pool.agents if a.id == best_id)
        params = clone_params(source.params)
    elif strategy is Strategy.FORKED:
        if pool.main_agent is None:
            pool.main_agent = init_params(int(rng.integers(2**63)))
        params = clone_params(pool.main_agent)
    elif strategy in (Strategy.RANDOM, Strategy.BEST):
        logger.info(
            "strategy %s has no copy source yet, falling back to fresh weights",
            strategy.value,
        )
    if params is None:
        params = init_params(int(rng.integers(2**63)))

    agent = Agent(id=pool.next_id, params=params, solved=[], birth_env=-1)
    pool.next_id += 1
    return agent


def train_until_solved(
    agent: Agent,
    level: Level,
    cfg: PpoConfig,
    budget: int = DEFAULT_BUDGET,
    threshold: float = DEFAULT_THRESHOLD,
    rng: np.random.Generator | None = None,
) -> TrainResult:
    """Alternate learn-epochs and greedy tests until the level is solved.

    An agent that already solves the level consumes no training.  Budget
    exhaustion returns failed=True; the caller decides what to discard.
    Optimizer moments are created fresh here and die with the call.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    if rng is None:
        rng = np.random.default_rng(0)

    reward = test_agent(agent.params, level)
    tests = 1
    if reward >= threshold:
        return TrainResult(
            agent=agent,
            epochs_used=0,
            steps_used=0,
            failed=False,
            final_reward=reward,
            tests_run=tests,
        )

    params = agent.params
    opt = Adam(params, lr=cfg.lr)
    for epoch in range(1, budget + 1):
        params, _ = learn_epoch(params, level, cfg, rng, opt=opt)
        reward = test_agent(params, level)
        tests += 1
        if reward >= threshold:
            agent.params = params
            return TrainResult(
                agent=agent,
                epochs_used=epoch,
                steps_used=epoch * cfg.rollout_steps,
                failed=False,
                final_reward=reward,
                tests_run=tests,
            )

    agent.params = params
    return TrainResult(
        agent=agent,
        epochs_used=budget,
        steps_used=budget * cfg.rollout_steps,
        failed=True,
        final_reward=reward,
        tests_run=tests,
    )


def sort_pool(pool: Pool) -> Pool:
    """Solved-set size descending, ties by ascending agent id."""
    pool.agents.sort(key=lambda a: (-len(a.solved), a.id))
    return pool


def optimize_pool(pool: Pool, new_agent: Agent, audit: list | None = None) -> Pool:
    """Let the freshly inserted agent absorb and displace others.

    Every level seed credited to another agent is re-tested against the
    new agent; passing seeds transfer (as additional credits).  Agents
    whose entire solved-set the new agent now covers are removed.  The
    pool is re-sorted afterwards.
    """
    for other in list(pool.agents):
        if other.id == new_agent.id:
            continue
        for seed in other.solved:
            if seed in new_agent.solved:
                continue
            reward = test_agent(new_agent.params, generate_level(seed, pool.grid))
            pool.tests_total += 1
            if reward >= pool.threshold:
                new_agent.solved.append(seed)
                if audit is not None:
                    audit.append(
                        {
                            "event": "absorb",
                            "env": seed,
                            "agent": new_agent.id,
                            "reward": reward,
                        }
                    )
        if set(other.solved) <= set(new_agent.solved):
            pool.agents.remove(other)
            if audit is not None:
                audit.append(
                    {"event": "remove", "agent": other.id, "covered_by": new_agent.id}
                )
    return sort_pool(pool)


def ecosystem_learn(
    pool: Pool,
    level: Level,
    cfg: PpoConfig,
    budget: int = DEFAULT_BUDGET,
    optimize: bool = True,
    audit: list | None = None,
) -> tuple[Pool, EnvOutcome]:
    """Present one level to the eco-system.

    Credits an existing solver when the scan finds one; otherwise creates,
    trains, and inserts a new agent (with optimization pass), or records a
    failure if the budget runs out.  Under the forked strategy a successful
    new agent's trained weights overwrite the main agent.
    """
    if (level.width, level.height, level.max_steps) != (
        pool.grid.width,
        pool.grid.height,
        pool.grid.max_steps,
    ):
        raise ValueError("level geometry does not match the pool's grid config")

    tests_before = pool.tests_total
    found = find_best_agent(pool, level)
    pool.tests_total += found.tests_run

    if found.solver is not None:
        solver = next(a for a in pool.agents if a.id == found.solver)
        if level.seed not in solver.solved:
            solver.solved.append(level.seed)
        if audit is not None:
            audit.append(
                {
                    "event": "credit",
                    "env": level.seed,
                    "agent": solver.id,
                    "reward": found.solver_reward,
                }
            )
        sort_pool(pool)
        return pool, EnvOutcome(
            level_seed=level.seed,
            solved_by=solver.id,
            created_new=False,
            training_steps_used=0,
            epochs_used=0,
            failed=False,
            tests_run=pool.tests_total - tests_before,
            credit_reward=found.solver_reward,
        )

    agent = initialize_agent(pool, found.best_id, pool.rng)
    agent.birth_env = level.seed
    result = train_until_solved(
        agent, level, cfg, budget=budget, threshold=pool.threshold, rng=pool.rng
    )
    pool.tests_total += result.tests_run

    if result.failed:
        if audit is not None:
            audit.append(
                {
                    "event": "failed",
                    "env": level.seed,
                    "agent": agent.id,
                    "reward": result.final_reward,
                }
            )
        return pool, EnvOutcome(
            level_seed=level.seed,
            solved_by=None,
            created_new=True,
            training_steps_used=result.steps_used,
            epochs_used=result.epochs_used,
            failed=True,
            tests_run=pool.tests_total - tests_before,
            credit_reward=None,
        )

    agent = result.agent
    agent.solved.append(level.seed)
    if audit is not None:
        audit.append(
            {
                "event": "solved",
                "env": level.seed,
                "agent": agent.id,
                "reward": result.final_reward,
            }
        )
    pool.agents.append(agent)
    if optimize:
        optimize_pool(pool, agent, audit=audit)
    else:
        sort_pool(pool)
    if pool.strategy is Strategy.FORKED:
        pool.main_agent = clone_params(agent.params)

    return pool, EnvOutcome(
        level_seed=level.seed,
        solved_by=agent.id,
        created_new=True,
        training_steps_used=result.steps_used,
        epochs_used=result.epochs_used,
        failed=False,
        tests_run=pool.tests_total - tests_before,
        credit_reward=result.final_reward,
    )


POOL_FILE = "pool.json"
_CHECKPOINT_VERSION = 1


def save_pool(pool: Pool, out_dir) -> None:
    """Checkpoint: pool.json plus one params file per agent (and main agent)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    agents = []
    for agent in pool.agents:
        ref = f"agent_{agent.id}.params.json"
        (out / ref).write_text(json.dumps(params_to_json(agent.params)))
        agents.append(
            {
                "id": agent.id,
                "solved": list(agent.solved),
                "birth_env": agent.birth_env,
                "params_ref": ref,
            }
        )
    main_ref = None
    if pool.main_agent is not None:
        main_ref = "main.params.json"
        (out / main_ref).write_text(json.dumps(params_to_json(pool.main_agent)))
    manifest = {
        "version": _CHECKPOINT_VERSION,
        "strategy": pool.strategy.value,
        "threshold": pool.threshold,
        "grid": {
            "width": pool.grid.width,
            "height": pool.grid.height,
            "max_steps": pool.grid.max_steps,
        },
        "next_id": pool.next_id,
        "agents": agents,
        "main_agent_ref": main_ref,
    }
    (out / POOL_FILE).write_text(json.dumps(manifest, indent=2))


def load_pool(in_dir, seed: int = 0) -> Pool:
    """Rebuild a pool from `save_pool` output; RNG state starts fresh."""
    src = Path(in_dir)
    manifest = json.loads((src / POOL_FILE).read_text())
    if manifest.get("version") != _CHECKPOINT_VERSION:
        raise ValueError(f"unsupported pool version {manifest.get('version')!r}")

    grid = GridConfig(**manifest["grid"])
    pool = Pool(
        strategy=Strategy(manifest["strategy"]),
        threshold=manifest["threshold"],
        grid=grid,
        rng=np.random.default_rng(seed),
        next_id=manifest["next_id"],
    )
    for entry in manifest["agents"]:
        params = params_from_json(json.loads((src / entry["params_ref"]).read_text()))
        pool.agents.append(
            Agent(
                id=entry["id"],
                params=params,
                solved=list(entry["solved"]),
                birth_env=entry["birth_env"],
            )
        )
    if manifest["main_agent_ref"] is not None:
        pool.main_agent = params_from_json(
            json.loads((src / manifest["main_agent_ref"]).read_text())
        )
    return pool
