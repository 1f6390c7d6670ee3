"""Incomplete-information wrapper of the bandwidth market.

The leader observes only a sliding window of its own last L posted prices
and the aggregate demand each drew; followers always play their analytic
best response, so stepping the environment is deterministic.  Demands that
would overshoot the bandwidth cap are scaled down proportionally before the
reward is evaluated.

Also provides the two non-learning baselines used in the experiments:
a uniform random pricer and an epsilon-greedy bandit over a fixed price grid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .game import MarketConfig, demand_profile, masp_utility

DEFAULT_HISTORY_LEN = 5


@dataclass(frozen=True)
class PomdpState:
    """Sliding window of (price, aggregate demand) pairs, oldest first."""

    history: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.history) < 1:
            raise ValueError("history must hold at least one (price, demand) pair")

    @property
    def window(self) -> int:
        return len(self.history)

    def features(self, config: MarketConfig) -> np.ndarray:
        """Normalized observation vector (price / p_max, demand / B_max), length 2L."""
        out = np.empty(2 * len(self.history))
        for k, (p, b) in enumerate(self.history):
            out[2 * k] = p / config.price_cap
            out[2 * k + 1] = b / config.bandwidth_cap
        return out


def reset(config: MarketConfig, seed, history_len: int = DEFAULT_HISTORY_LEN) -> PomdpState:
    """Initial state: random feasible prices and the demand each would draw."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pairs = []
    for _ in range(history_len):
        p = float(rng.uniform(config.unit_cost, config.price_cap))
        pairs.append((p, _capped_total(config, p)[0]))
    return PomdpState(history=tuple(pairs))


def _capped_total(config: MarketConfig, price: float) -> tuple[float, np.ndarray]:
    """Aggregate demand at a price, scaled into the bandwidth cap if needed."""
    demands = demand_profile(config, price)
    total = demands.sum()
    if total > config.bandwidth_cap:
        demands = demands * (config.bandwidth_cap / total)
        total = config.bandwidth_cap
    return float(total), demands


def step(state: PomdpState, price_action: float, config: MarketConfig) -> tuple[float, PomdpState]:
    """Post a price, let followers respond, collect the leader's payoff.

    The action is clamped into [unit_cost, price_cap] before evaluation.
    Returns (reward, next state); the window length is preserved.
    """
    price = float(min(max(price_action, config.unit_cost), config.price_cap))
    total, demands = _capped_total(config, price)
    reward = masp_utility(config, price, demands)
    nxt = PomdpState(history=state.history[1:] + ((price, total),))
    return reward, nxt


@dataclass
class StepRecord:
    episode: int
    round: int
    step: int
    price: float
    aggregate_demand: float
    reward: float


@dataclass
class EpisodeLog:
    """Per-step trace of one run, serializable to CSV."""

    seed: int
    config_hash: str = ""
    records: list[StepRecord] = field(default_factory=list)

    def add(self, episode: int, round: int, step: int, price: float, demand: float, reward: float):
        self.records.append(StepRecord(episode, round, step, price, demand, reward))

    def episode_means(self) -> np.ndarray:
        """Mean reward per episode, in episode order."""
        sums: dict[int, list[float]] = {}
        for r in self.records:
            sums.setdefault(r.episode, []).append(r.reward)
        return np.array([float(np.mean(sums[e])) for e in sorted(sums)])

    def write_csv(self, path, version: str = ""):
        with open(path, "w", newline="") as fh:
            if self.config_hash or version:
                fh.write(f"# version={version} config_hash={self.config_hash} seed={self.seed}\n")
            fh.write("# units: price per MHz, aggregate_demand MHz, reward currency\n")
            writer = csv.writer(fh)
            writer.writerow(["episode", "round", "step", "price", "aggregate_demand", "reward", "seed"])
            for r in self.records:
                writer.writerow(
                    [r.episode, r.round, r.step, repr(r.price), repr(r.aggregate_demand), repr(r.reward), self.seed]
                )


def random_policy(state: PomdpState, config: MarketConfig, rng: np.random.Generator) -> float:
    """Uniform price draw on [unit_cost, price_cap]; ignores the state."""
    return float(rng.uniform(config.unit_cost, config.price_cap))


@dataclass
class GreedyMemory:
    """Running-mean bandit memory over a uniform price grid.

    Arms never tried are visited first in ascending price order (optimistic
    initialization); afterwards the best-known arm is exploited with
    probability 1 - epsilon.  Epsilon decays once per round.
    """

    arms: np.ndarray
    counts: np.ndarray
    means: np.ndarray
    epsilon: float
    epsilon_decay: float

    @classmethod
    def fresh(cls, config: MarketConfig, n_arms: int = 64,
              epsilon: float = 0.1, epsilon_decay: float = 0.995) -> "GreedyMemory":
        return cls(
            arms=np.linspace(config.unit_cost, config.price_cap, n_arms),
            counts=np.zeros(n_arms, dtype=int),
            means=np.zeros(n_arms),
            epsilon=epsilon,
            epsilon_decay=epsilon_decay,
        )


def greedy_policy(state: PomdpState, memory: GreedyMemory,
                  rng: np.random.Generator | None = None) -> tuple[float, int]:
    """Pick a price arm; returns (price, arm index) so the reward can be credited."""
    untried = np.flatnonzero(memory.counts == 0)
    if untried.size:
        arm = int(untried[0])  # ascending sweep; empty memory -> lowest price
    elif rng is not None and rng.random() < memory.epsilon:
        arm = int(rng.integers(memory.arms.size))
    else:
        arm = int(np.argmax(memory.means))  # first max: lowest-price tie-break
    return float(memory.arms[arm]), arm


def greedy_update(memory: GreedyMemory, arm: int, reward: float):
    """Credit a reward to an arm (running mean) and decay epsilon one round."""
    memory.counts[arm] += 1
    memory.means[arm] += (reward - memory.means[arm]) / memory.counts[arm]
    memory.epsilon *= memory.epsilon_decay


def run_baseline(
    config: MarketConfig,
    kind: str,
    episodes: int,
    rounds: int,
    seed: int,
    history_len: int = DEFAULT_HISTORY_LEN,
) -> EpisodeLog:
    """Roll a baseline policy for episodes x rounds steps and log every step."""
    rng = np.random.default_rng(seed)
    log = EpisodeLog(seed=seed)
    memory = GreedyMemory.fresh(config) if kind == "greedy" else None
    for ep in range(episodes):
        state = reset(config, rng, history_len)
        for rnd in range(rounds):
            if kind == "random":
                price = random_policy(state, config, rng)
                arm = None
            elif kind == "greedy":
                price, arm = greedy_policy(state, memory, rng)
            else:
                raise ValueError(f"unknown baseline {kind!r}")
            reward, state = step(state, price, config)
            if arm is not None:
                greedy_update(memory, arm, reward)
            log.add(ep, rnd, 0, price, state.history[-1][1], reward)
    return log
