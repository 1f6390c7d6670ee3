"""Step the partially observed market and race the two non-learning baselines.

The leader sees only a sliding window of its last five (price, demand)
pairs.  A uniform random pricer and an epsilon-greedy bandit over a 64-arm
price grid provide the reference points the learning agent must beat.
"""

import numpy as np

from semcom_market.config import load_config
from semcom_market.env import reset, run_baseline, step
from semcom_market.game import equilibrium

market = load_config().market()
oracle = equilibrium(market)

state = reset(market, seed=0)
print("initial observation window (price, aggregate demand):")
for p, b in state.history:
    print(f"  ({p:7.3f}, {b:7.3f})")

print()
print("stepping a few hand-picked prices:")
for price in (2.0, 4.29, 8.0, 16.0):
    reward, state = step(state, price, market)
    print(f"  post {price:5.2f} -> sold {state.history[-1][1]:6.3f} MHz, payoff {reward:7.3f}")
print(f"(the equilibrium price {oracle.price:.3f} earns {oracle.leader_utility:.3f})")

print()
episodes, rounds = 500, 10
for kind in ("random", "greedy"):
    log = run_baseline(market, kind, episodes, rounds, seed=0)
    means = log.episode_means()
    print(f"{kind:>6}: first-50 mean {means[:50].mean():7.3f}   "
          f"last-50 mean {means[-50:].mean():7.3f}   "
          f"({means[-50:].mean() / oracle.leader_utility:.1%} of equilibrium)")

print()
print("greedy sweeps its arms once, then locks onto the best one; random never learns.")
