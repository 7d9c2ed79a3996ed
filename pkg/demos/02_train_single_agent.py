"""
Training one PPO agent on one level
===================================

A fresh two-head tanh MLP (actor and critic), trained with clipped-surrogate
PPO until its greedy test episode clears the 0.8 solved threshold.
"""

import numpy as np

from ecopool import PpoConfig, generate_level, init_params, learn_epoch
from ecopool.policy import Adam
from ecopool.ppo import test_agent

level = generate_level(0)
cfg = PpoConfig()

params = init_params(seed=0)
opt = Adam(params, lr=cfg.lr)
rng = np.random.default_rng(42)

# One learn-epoch = one rollout (cfg.rollout_steps env steps) + one PPO
# update over shuffled minibatches.  The greedy test is the solve check:
# argmax actions, no exploration.
reward = test_agent(params, level)
print(f"epoch   0: greedy reward {reward:.3f}")
epoch = 0
while reward < 0.8 and epoch < 300:
    params, steps = learn_epoch(params, level, cfg, rng, opt)
    epoch += 1
    reward = test_agent(params, level)
    if epoch % 5 == 0 or reward >= 0.8:
        print(f"epoch {epoch:3d}: greedy reward {reward:.3f}")

print()
if reward >= 0.8:
    print(f"solved after {epoch} epochs ({epoch * cfg.rollout_steps} env steps)")
else:
    print("budget exhausted without solving")

# The same seeds give the same run, down to the last bit.
params2 = init_params(seed=0)
opt2 = Adam(params2, lr=cfg.lr)
rng2 = np.random.default_rng(42)
params2, _ = learn_epoch(params2, level, cfg, rng2, opt2)
fresh, _ = learn_epoch(init_params(seed=0), level, cfg, np.random.default_rng(42),
                       Adam(init_params(seed=0), lr=cfg.lr))
print("first epoch reproducible:", params2 == fresh)
