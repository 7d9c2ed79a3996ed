"""
Comparing new-agent initialization strategies
=============================================

The strategy only decides which weights a newly spawned agent starts
from: fresh (basic), a random pool member, the pool's best scorer on the
new level, or a fork of the continually-updated main agent.  A compare
runs each strategy over the same level schedule and aggregates runs.
"""

from pathlib import Path

from ecopool import ExperimentConfig, GridConfig, PpoConfig, Strategy
from ecopool.harness import compare_suite

cfg = ExperimentConfig(
    strategy=Strategy.BASIC,        # template; compare swaps this per suite
    n_train_envs=8,
    eval_every=4,
    n_eval_envs=5,
    train_seed_base=0,
    eval_seed_base=1_000_000,
    n_runs=2,
    budget=200,
    ppo=PpoConfig(rollout_steps=256, minibatch_size=64, update_epochs=6,
                  entropy_coef=0.02),
    grid=GridConfig(width=9, height=9, max_steps=100),
)

out = Path("runs/demo-compare")
strategies = [Strategy.BASIC, Strategy.FORKED]
aggregates = compare_suite(cfg, strategies, out)

print(f"{'strategy':>8} {'zeta':>7} {'pool':>6} {'cum steps':>12}")
for strategy in strategies:
    final = aggregates[strategy][-1]
    print(f"{strategy.value:>8} {final.zeta_mean:>7.3f} "
          f"{final.pool_size_mean:>6.1f} "
          f"{final.cum_steps_mean:>9.0f} +- {final.cum_steps_stderr:.0f}")

# compare.csv holds the per-checkpoint table; charts/ has one SVG line
# chart per metric with stderr whiskers.
print()
print("wrote", out / "compare.csv")
print("wrote", *(p.name for p in sorted((out / "charts").glob("*.svg"))))

# Forked agents inherit the main agent's competence, so they typically
# need far fewer training steps per new environment than basic's
# from-scratch agents; at paper scale the gap is roughly sixfold.
