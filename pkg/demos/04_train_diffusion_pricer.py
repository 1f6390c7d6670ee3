"""Train the diffusion pricing policy for a short budget and inspect it.

A five-step denoising chain turns Gaussian noise into a price conditioned on
the observation window; a critic regresses observed payoffs and the actor
climbs it through the whole chain.  300 episodes (a few minutes on one core)
already lands within a few percent of the equilibrium; the full 1000-episode
run used in the experiments gets within a fraction of a percent.
"""

import numpy as np

from semcom_market.agent import TrainConfig, train
from semcom_market.config import load_config
from semcom_market.env import reset
from semcom_market.game import equilibrium

market = load_config().market()
oracle = equilibrium(market)
print(f"equilibrium benchmark: price {oracle.price:.4f}, utility {oracle.leader_utility:.4f}")

tc = TrainConfig(episodes=300, seed=0)
print(f"training: {tc.episodes} episodes x {tc.rounds_per_episode} rounds, "
      f"N={tc.denoise_steps} denoising steps, batch {tc.batch_size} ...")
result = train(market, tc)

means = np.array([c.mean_reward for c in result.curves])
for a in range(0, tc.episodes, 50):
    block = means[a:a + 50]
    print(f"  episodes {a:3d}-{a + 49:3d}: mean reward {block.mean():7.3f} "
          f"({block.mean() / oracle.leader_utility:6.1%})")

print()
trainer = result.trainer
state = reset(market, seed=123, history_len=tc.history_len)
price = trainer.infer_price(state)
print(f"noise-free inference from a fresh state: price {price:.4f} "
      f"(equilibrium {oracle.price:.4f}, off by {abs(price - oracle.price) / oracle.price:.2%})")
print(f"final-50-episode mean reward: {result.final_mean_reward():.4f} "
      f"({result.final_mean_reward() / oracle.leader_utility:.2%} of equilibrium)")
