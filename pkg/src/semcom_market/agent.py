"""Diffusion-policy pricing agent.

The pricing action is generated by reverse-denoising a Gaussian draw through
an N-step chain conditioned on the observation window,

    s_{n-1} = s_n / sqrt(a_n)
              - b_n / sqrt(a_n (1 - abar_n)) * eps_net(s_n, e, n)
              + sqrt(b_n) * noise,          noise = 0 at n = 1,

then squashing the raw s_0 with tanh and mapping it onto the price range.
A critic regresses the observed leader payoff on (state, action); the actor
ascends the critic by differentiating through the squash and the entire
denoising chain with the injected noises held fixed (pathwise gradients).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import nets
from .env import EpisodeLog, PomdpState, reset, step
from .game import MarketConfig
from .nets import AdamState, DenseNet


@dataclass(frozen=True)
class DiffusionSchedule:
    """Noise schedule: betas ordered n = 1..N at indices 0..N-1."""

    betas: np.ndarray
    alphas: np.ndarray = field(init=False)
    alpha_bars: np.ndarray = field(init=False)

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=float)
        if betas.ndim != 1 or betas.size < 1:
            raise ValueError("betas must be a non-empty vector")
        if np.any(betas <= 0.0) or np.any(betas >= 1.0):
            raise ValueError("every beta must lie in (0, 1)")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alphas", 1.0 - betas)
        object.__setattr__(self, "alpha_bars", np.cumprod(1.0 - betas))

    @property
    def n_steps(self) -> int:
        return int(self.betas.size)

    @classmethod
    def linear(cls, n_steps: int, beta_min: float = 1e-4, beta_max: float = 0.2) -> "DiffusionSchedule":
        return cls(betas=np.linspace(beta_min, beta_max, n_steps))


def time_embedding(n: int, dim: int, dtype=np.float64) -> np.ndarray:
    """Sinusoidal embedding of the denoising index, dim/2 frequency pairs."""
    half = dim // 2
    freqs = 10_000.0 ** (-np.arange(half) / half)
    ang = n * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)]).astype(dtype)


def action_to_price(u: np.ndarray | float, market: MarketConfig):
    """Map squashed action u in [-1, 1] onto [unit_cost, price_cap]."""
    return market.unit_cost + (u + 1.0) * 0.5 * (market.price_cap - market.unit_cost)


def price_to_action(price: np.ndarray | float, market: MarketConfig):
    return 2.0 * (price - market.unit_cost) / (market.price_cap - market.unit_cost) - 1.0


def denoise_batch(
    policy: DenseNet,
    states: np.ndarray,
    schedule: DiffusionSchedule,
    rng: np.random.Generator | None,
    record: bool = False,
    noise_free: bool = False,
    s_init: np.ndarray | None = None,
):
    """Run the reverse chain for a batch of observation vectors.

    Returns (u, trace): u is the tanh-squashed action in [-1, 1], one per
    row of states; trace carries the per-step forward caches needed by
    :func:`denoise_backward` when record=True (otherwise None).
    """
    states = np.asarray(states, dtype=policy.dtype)
    batch = states.shape[0]
    if rng is None and (s_init is None or (not noise_free and schedule.n_steps > 1)):
        raise ValueError("rng required unless the chain is noise-free with a given s_init")
    if s_init is not None:
        s = np.asarray(s_init, dtype=policy.dtype).copy()
    else:
        s = rng.standard_normal(batch).astype(policy.dtype)
    trace = [] if record else None
    embed_dim = policy.weights[0].shape[0] - states.shape[1] - 1
    for n in range(schedule.n_steps, 0, -1):
        a_n = schedule.alphas[n - 1]
        b_n = schedule.betas[n - 1]
        abar_n = schedule.alpha_bars[n - 1]
        c1 = 1.0 / np.sqrt(a_n)
        c2 = b_n / np.sqrt(a_n * (1.0 - abar_n))
        emb = time_embedding(n, embed_dim, dtype=policy.dtype)
        x = np.concatenate(
            [s[:, None], states, np.broadcast_to(emb, (batch, embed_dim))], axis=1
        )
        eps_pred, cache = nets.forward_cached(policy, x)
        s = c1 * s - c2 * eps_pred[:, 0]
        if n > 1 and not noise_free:
            s = s + np.sqrt(b_n) * rng.standard_normal(batch).astype(policy.dtype)
        if record:
            trace.append((cache, float(c1), float(c2)))
    u = np.tanh(s)
    return u, trace


def denoise_backward(policy: DenseNet, trace, u: np.ndarray, grad_u: np.ndarray) -> dict:
    """Backpropagate dLoss/du through the squash and all denoising steps.

    The injected noises are constants of the recorded forward pass, so the
    raw action is a deterministic function of the policy parameters and the
    gradient accumulates one net-backward per chain step.
    """
    grads = nets.zero_grads(policy)
    g = (grad_u * (1.0 - u * u)).astype(policy.dtype)  # through tanh
    for cache, c1, c2 in reversed(trace):
        # forward step was s_prev = c1*s - c2*eps_net(x); g is dLoss/ds_prev
        step_grads, dx = nets.backward_from_cache(policy, cache, (-c2 * g)[:, None])
        nets.accumulate_grads(grads, step_grads)
        g = c1 * g + dx[:, 0]  # s feeds both the linear term and column 0 of x
    return grads


def sample_action(
    policy: DenseNet,
    state: PomdpState,
    schedule: DiffusionSchedule,
    market: MarketConfig,
    rng: np.random.Generator,
    record_noise: bool = False,
):
    """Generate one price from the current observation window."""
    feats = state.features(market)[None, :]
    u, trace = denoise_batch(policy, feats, schedule, rng, record=record_noise)
    return float(action_to_price(u[0], market)), trace


def infer(
    policy: DenseNet,
    state: PomdpState,
    schedule: DiffusionSchedule,
    market: MarketConfig,
    rng: np.random.Generator,
    n_draws: int = 16,
    s_init: np.ndarray | None = None,
) -> float:
    """Noise-free chain from the initial Gaussian draw(s); mean price over draws."""
    feats = state.features(market)
    batch = n_draws if s_init is None else np.asarray(s_init).size
    states = np.broadcast_to(feats, (batch, feats.size))
    u, _ = denoise_batch(policy, states, schedule, rng if s_init is None else None,
                         noise_free=True, s_init=s_init)
    return float(np.mean(action_to_price(u, market)))


class ReplayBuffer:
    """FIFO ring of (state, action, reward, next_state); uniform batches."""

    def __init__(self, capacity: int, state_dim: int, dtype=np.float32):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.states = np.zeros((capacity, state_dim), dtype=dtype)
        self.actions = np.zeros(capacity, dtype=dtype)
        self.rewards = np.zeros(capacity, dtype=dtype)
        self.next_states = np.zeros((capacity, state_dim), dtype=dtype)
        self.size = 0
        self.head = 0

    def add(self, state, action: float, reward: float, next_state):
        self.states[self.head] = state
        self.actions[self.head] = action
        self.rewards[self.head] = reward
        self.next_states[self.head] = next_state
        self.head = (self.head + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def clear(self):
        self.size = 0
        self.head = 0

    def sample(self, rng: np.random.Generator, batch_size: int) -> dict:
        """Uniform sample without replacement within the batch."""
        take = min(batch_size, self.size)
        idx = rng.choice(self.size, size=take, replace=False)
        return {
            "states": self.states[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_states": self.next_states[idx],
        }


@dataclass
class TrainConfig:
    """Training hyperparameters; defaults follow the reported training setup."""

    episodes: int = 1000
    rounds_per_episode: int = 10
    steps_per_round: int = 1
    batch_size: int = 512
    denoise_steps: int = 5
    buffer_capacity: int = 1_000_000
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    tau: float = 0.005
    discount: float = 0.95
    weight_decay: float = 1e-4
    history_len: int = 5
    hidden_units: tuple = (256, 256)
    time_embed_dim: int = 8
    explore_scale: float = 0.1   # initial noise std as a fraction of the price range
    explore_decay: float = 0.999  # applied once per round
    bootstrap_critic: bool = False
    reset_buffer_each_episode: bool = False
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        for name in ("episodes", "rounds_per_episode", "steps_per_round", "batch_size",
                     "denoise_steps", "buffer_capacity", "history_len", "time_embed_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"TrainConfig.{name} must be >= 1")
        for name in ("actor_lr", "critic_lr", "tau", "discount", "weight_decay",
                     "explore_scale", "explore_decay"):
            if getattr(self, name) < 0:
                raise ValueError(f"TrainConfig.{name} must be non-negative")
        if self.batch_size > self.buffer_capacity:
            raise ValueError("batch_size cannot exceed buffer_capacity")
        if self.time_embed_dim % 2:
            raise ValueError("time_embed_dim must be even (sin/cos pairs)")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64


@dataclass
class EpisodeCurve:
    episode: int
    mean_reward: float
    critic_loss: float
    actor_loss: float
    wall_ms: float


def update_critic(critic: DenseNet, batch: dict, adam: AdamState,
                  targets: np.ndarray | None = None) -> float:
    """One regression step of the critic toward the recorded payoffs.

    Default target is the immediate reward stored with each transition (the
    objective value of playing that action in that state); a bootstrapped
    target vector may be passed instead.  Returns the pre-step loss.
    Batches smaller than 2 are skipped.
    """
    n = batch["states"].shape[0]
    if n < 2:
        return float("nan")
    y = batch["rewards"] if targets is None else targets
    x = np.concatenate([batch["states"], batch["actions"][:, None]], axis=1)
    q, cache = nets.forward_cached(critic, x)
    err = q[:, 0] - y
    loss = float(np.mean(err ** 2))
    grads, _ = nets.backward_from_cache(critic, cache, (2.0 * err / n)[:, None])
    nets.adam_step(critic, grads, adam)
    return loss


def update_actor(policy: DenseNet, critic: DenseNet, states: np.ndarray,
                 schedule: DiffusionSchedule, adam: AdamState,
                 rng: np.random.Generator) -> float:
    """One ascent step on the critic value of freshly sampled actions.

    Actions are re-sampled with recorded reparameterized noise so the
    gradient of -Q(e, s_0) flows through the squash and every denoising
    step; the critic is held fixed.  Returns the pre-step loss -mean(Q).
    """
    n = states.shape[0]
    if n < 2:
        return float("nan")
    u, trace = denoise_batch(policy, states, schedule, rng, record=True)
    x = np.concatenate([states, u[:, None]], axis=1)
    q, cache = nets.forward_cached(critic, x)
    loss = float(-np.mean(q))
    _, dx = nets.backward_from_cache(critic, cache, np.full((n, 1), -1.0 / n))
    grads = denoise_backward(policy, trace, u, dx[:, -1])
    nets.adam_step(policy, grads, adam)
    return loss


class GdmTrainer:
    """Owns all mutable training state; checkpoints restore it bit-exactly."""

    def __init__(self, market: MarketConfig, tc: TrainConfig):
        self.market = market
        self.tc = tc
        self.schedule = DiffusionSchedule.linear(tc.denoise_steps)
        dtype = tc.np_dtype
        state_dim = 2 * tc.history_len
        seeds = np.random.SeedSequence(tc.seed).spawn(5)
        init_rng = np.random.default_rng(seeds[0])
        self.env_rng = np.random.default_rng(seeds[1])
        self.explore_rng = np.random.default_rng(seeds[2])
        self.chain_rng = np.random.default_rng(seeds[3])
        self.batch_rng = np.random.default_rng(seeds[4])

        policy_sizes = [1 + state_dim + tc.time_embed_dim, *tc.hidden_units, 1]
        critic_sizes = [state_dim + 1, *tc.hidden_units, 1]
        self.policy = DenseNet.create(policy_sizes, init_rng, dtype=dtype, final_scale=0.01)
        self.critic = DenseNet.create(critic_sizes, init_rng, dtype=dtype)
        self.target_policy = self.policy.copy()
        self.target_critic = self.critic.copy()
        self.adam_actor = AdamState.for_net(self.policy, tc.actor_lr, tc.weight_decay)
        self.adam_critic = AdamState.for_net(self.critic, tc.critic_lr, tc.weight_decay)
        self.buffer = ReplayBuffer(tc.buffer_capacity, state_dim, dtype=dtype)

        self.episodes_done = 0
        self.global_round = 0
        self.curves: list[EpisodeCurve] = []
        self.log_rows: list[tuple] = []  # (episode, round, step, price, agg_demand, reward)

    # -- training ---------------------------------------------------------

    def explore_sigma(self) -> float:
        span = self.market.price_cap - self.market.unit_cost
        return self.tc.explore_scale * span * self.tc.explore_decay ** self.global_round

    def _critic_targets(self, batch: dict) -> np.ndarray | None:
        if not self.tc.bootstrap_critic:
            return None
        u_next, _ = denoise_batch(self.target_policy, batch["next_states"],
                                  self.schedule, self.batch_rng)
        x = np.concatenate([batch["next_states"], u_next[:, None]], axis=1)
        q_next = nets.forward(self.target_critic, x)[:, 0]
        return batch["rewards"] + self.tc.discount * q_next

    def run(self, episodes: int):
        """Advance training by whole episodes, appending curves and log rows."""
        tc = self.tc
        for _ in range(episodes):
            ep = self.episodes_done
            t0 = time.perf_counter()
            if tc.reset_buffer_each_episode:
                self.buffer.clear()
            state = reset(self.market, self.env_rng, tc.history_len)
            rewards, closses, alosses = [], [], []
            for rnd in range(tc.rounds_per_episode):
                sigma = self.explore_sigma()
                for st in range(tc.steps_per_round):
                    feats = state.features(self.market)
                    price, _ = sample_action(self.policy, state, self.schedule,
                                             self.market, self.chain_rng)
                    noisy = price + sigma * float(self.explore_rng.standard_normal())
                    noisy = min(max(noisy, self.market.unit_cost), self.market.price_cap)
                    reward, state = step(state, noisy, self.market)
                    self.buffer.add(feats, price_to_action(noisy, self.market),
                                    reward, state.features(self.market))
                    rewards.append(reward)
                    self.log_rows.append((ep, rnd, st, noisy, state.history[-1][1], reward))
                    if self.buffer.size >= 2:
                        batch = self.buffer.sample(self.batch_rng, tc.batch_size)
                        closses.append(update_critic(self.critic, batch, self.adam_critic,
                                                     self._critic_targets(batch)))
                        alosses.append(update_actor(self.policy, self.critic, batch["states"],
                                                    self.schedule, self.adam_actor,
                                                    self.chain_rng))
                        nets.soft_update(self.target_critic, self.critic, tc.tau)
                        nets.soft_update(self.target_policy, self.policy, tc.tau)
                self.global_round += 1
            self.curves.append(EpisodeCurve(
                episode=ep,
                mean_reward=float(np.mean(rewards)),
                critic_loss=float(np.mean(closses)) if closses else float("nan"),
                actor_loss=float(np.mean(alosses)) if alosses else float("nan"),
                wall_ms=(time.perf_counter() - t0) * 1e3,
            ))
            self.episodes_done += 1

    def infer_price(self, state: PomdpState, n_draws: int = 16) -> float:
        return infer(self.policy, state, self.schedule, self.market,
                     self.chain_rng, n_draws=n_draws)

    # -- checkpointing ----------------------------------------------------

    def save(self, path):
        state = {}
        for name in ("policy", "critic", "target_policy", "target_critic"):
            state.update(nets.net_to_state(getattr(self, name), name))
        state.update(nets.adam_to_state(self.adam_actor, "adam_actor"))
        state.update(nets.adam_to_state(self.adam_critic, "adam_critic"))
        state["buffer.states"] = self.buffer.states[: self.buffer.size]
        state["buffer.actions"] = self.buffer.actions[: self.buffer.size]
        state["buffer.rewards"] = self.buffer.rewards[: self.buffer.size]
        state["buffer.next_states"] = self.buffer.next_states[: self.buffer.size]
        state["buffer.meta"] = np.array([self.buffer.size, self.buffer.head], dtype=np.int64)
        state["counters"] = np.array([self.episodes_done, self.global_round], dtype=np.int64)
        rng_states = {
            name: getattr(self, name).bit_generator.state
            for name in ("env_rng", "explore_rng", "chain_rng", "batch_rng")
        }
        state["rng_json"] = np.array(json.dumps(rng_states))
        state["curves"] = np.array(
            [[c.episode, c.mean_reward, c.critic_loss, c.actor_loss, c.wall_ms] for c in self.curves]
        ).reshape(-1, 5)
        state["log_rows"] = np.array(self.log_rows, dtype=float).reshape(-1, 6)
        state["train_config_json"] = np.array(json.dumps(
            {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(self.tc).items()}
        ))
        np.savez(path, **state)

    @classmethod
    def load(cls, path, market: MarketConfig) -> "GdmTrainer":
        data = np.load(path, allow_pickle=False)
        raw = json.loads(str(data["train_config_json"]))
        raw["hidden_units"] = tuple(raw["hidden_units"])
        tc = TrainConfig(**raw)
        trainer = cls(market, tc)
        for name in ("policy", "critic", "target_policy", "target_critic"):
            setattr(trainer, name, nets.net_from_state(data, name))
        trainer.adam_actor = nets.adam_from_state(data, "adam_actor")
        trainer.adam_critic = nets.adam_from_state(data, "adam_critic")
        size, head = (int(v) for v in data["buffer.meta"])
        trainer.buffer.states[:size] = data["buffer.states"]
        trainer.buffer.actions[:size] = data["buffer.actions"]
        trainer.buffer.rewards[:size] = data["buffer.rewards"]
        trainer.buffer.next_states[:size] = data["buffer.next_states"]
        trainer.buffer.size, trainer.buffer.head = size, head
        trainer.episodes_done, trainer.global_round = (int(v) for v in data["counters"])
        rng_states = json.loads(str(data["rng_json"]))
        for name, st in rng_states.items():
            getattr(trainer, name).bit_generator.state = st
        trainer.curves = [
            EpisodeCurve(int(e), float(mr), float(cl), float(al), float(wm))
            for e, mr, cl, al, wm in data["curves"]
        ]
        trainer.log_rows = [tuple(float(v) for v in row) for row in data["log_rows"]]
        return trainer


@dataclass
class TrainResult:
    trainer: GdmTrainer
    curves: list[EpisodeCurve]
    log_rows: list[tuple]

    @property
    def policy(self) -> DenseNet:
        return self.trainer.policy

    @property
    def critic(self) -> DenseNet:
        return self.trainer.critic

    def final_mean_reward(self, last: int = 50) -> float:
        tail = self.curves[-last:]
        return float(np.mean([c.mean_reward for c in tail]))

    def episode_log(self, config_hash: str = "") -> EpisodeLog:
        log = EpisodeLog(seed=self.trainer.tc.seed, config_hash=config_hash)
        for ep, rnd, st, price, demand, reward in self.log_rows:
            log.add(int(ep), int(rnd), int(st), float(price), float(demand), float(reward))
        return log


def train(market: MarketConfig, tc: TrainConfig) -> TrainResult:
    """Full training per the three-phase procedure; deterministic under tc.seed."""
    trainer = GdmTrainer(market, tc)
    trainer.run(tc.episodes)
    return TrainResult(trainer=trainer, curves=trainer.curves, log_rows=trainer.log_rows)
