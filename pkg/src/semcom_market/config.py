"""Experiment configuration: flat dotted keys, hard validation, content hash.

Config files are plain text, one `section.key = value` per line, with `#`
comments.  Every key has a default matching the reference simulation
settings, so an empty file reproduces the headline experiment.  Unknown keys
and malformed values are hard errors: a misconfigured reproduction run must
fail loudly, not drift.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .agent import TrainConfig
from .channel import (
    BITS_PER_MEGABYTE,
    LinkParams,
    SemanticPayload,
    db_to_linear,
    dbm_to_watts,
)
from .game import MarketConfig, UserProfile


class ConfigError(ValueError):
    """Unknown key, unparsable value, or an invariant violation."""


# Defaults reproduce the reference scenario: five users, 10 MB source,
# bandwidth in MHz throughout.
DEFAULTS: dict = {
    "market.unit_cost": 2.0,
    "market.service_fee": 10.0,
    "market.bandwidth_cap_mhz": 200.0,
    "market.price_cap": 20.0,
    "users.immersion": [15.0],           # scalar or one value per user
    "users.distance_m": [100.0, 200.0, 300.0, 400.0, 500.0],
    "users.compression_rate": [0.3, 0.4, 0.5, 0.6, 0.7],
    "users.ssim": [0.75, 0.8, 0.85, 0.9, 0.95],
    "channel.tx_power_dbm": 40.0,
    "channel.unit_gain_db": -20.0,
    "channel.noise_power_dbm": -150.0,
    "channel.path_loss_exp": 2.0,
    "channel.source_megabytes": 10.0,
    "game.grid_points": 10_000,
    "env.history_len": 5,
    "run.seed": 0,
    "train.episodes": 1000,
    "train.rounds": 10,
    "train.steps": 1,
    "train.batch_size": 512,
    "train.denoise_steps": 5,
    "train.buffer_capacity": 1_000_000,
    "train.actor_lr": 1e-4,
    "train.critic_lr": 1e-3,
    "train.soft_update_tau": 0.005,
    "train.discount": 0.95,
    "train.weight_decay": 1e-4,
    "train.explore_scale": 0.1,
    "train.explore_decay": 0.999,
    "train.bootstrap_critic": False,
    "train.reset_buffer_each_episode": False,
    "train.hidden_units": [256, 256],
    "train.time_embed_dim": 8,
    "train.dtype": "float32",
    "train.final_window": 50,
    "sweep.axis": "unit_cost",           # unit_cost | user_count | denoising_steps
    "sweep.values": [2.0, 3.0, 4.0, 5.0],
    "sweep.seeds": 3,
    "sweep.episodes": 300,
    "sweep.new_user_distance_m": 500.0,
    "sweep.new_user_compression_rate": 0.5,
    "sweep.new_user_ssim": 0.8,
}

_STR_KEYS = {"sweep.axis", "train.dtype"}


def _parse_value(key: str, text: str):
    default = DEFAULTS[key]
    text = text.strip()
    try:
        if isinstance(default, bool):
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"expected a boolean, got {text!r}")
        if isinstance(default, list):
            parts = text.replace(",", " ").split()
            if not parts:
                raise ValueError("empty list")
            cast = int if all(isinstance(v, int) for v in default) else float
            return [cast(p) for p in parts]
        if key in _STR_KEYS:
            return text
        if isinstance(default, int):
            return int(text)
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines into a raw override mapping."""
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        overrides[key] = _parse_value(key, value)
    return overrides


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved configuration; build the domain objects from it."""

    raw: dict

    def __getitem__(self, key: str):
        return self.raw[key]

    # -- domain objects -----------------------------------------------------

    def _user_lists(self) -> tuple[list, list, list, list]:
        dist = list(self.raw["users.distance_m"])
        m = len(dist)

        def expand(key):
            vals = list(self.raw[key])
            if len(vals) == 1:
                return vals * m
            if len(vals) != m:
                raise ConfigError(
                    f"{key} has {len(vals)} entries but users.distance_m defines {m} users"
                )
            return vals

        return dist, expand("users.compression_rate"), expand("users.ssim"), expand("users.immersion")

    def market(self, extra_users: int = 0, unit_cost: float | None = None) -> MarketConfig:
        """Build the market; extra_users appends the sweep's new-user profile."""
        raw = self.raw
        dist, rates, ssims, imms = self._user_lists()
        for _ in range(extra_users):
            dist.append(raw["sweep.new_user_distance_m"])
            rates.append(raw["sweep.new_user_compression_rate"])
            ssims.append(raw["sweep.new_user_ssim"])
            imms.append(imms[0])
        source_bits = raw["channel.source_megabytes"] * BITS_PER_MEGABYTE
        users = []
        try:
            for d, r, s, im in zip(dist, rates, ssims, imms):
                link = LinkParams(
                    tx_power_w=dbm_to_watts(raw["channel.tx_power_dbm"]),
                    noise_power_w=dbm_to_watts(raw["channel.noise_power_dbm"]),
                    unit_gain=db_to_linear(raw["channel.unit_gain_db"]),
                    distance_m=d,
                    path_loss_exp=raw["channel.path_loss_exp"],
                )
                payload = SemanticPayload(source_bits=source_bits, compression_rate=r)
                users.append(UserProfile(immersion=im, ssim=s, link=link, payload=payload))
            return MarketConfig(
                unit_cost=raw["market.unit_cost"] if unit_cost is None else unit_cost,
                service_fee=raw["market.service_fee"],
                bandwidth_cap=raw["market.bandwidth_cap_mhz"],
                price_cap=raw["market.price_cap"],
                users=tuple(users),
            )
        except ValueError as exc:
            raise ConfigError(f"invalid market parameters: {exc}") from exc

    def train_config(self, seed: int | None = None, episodes: int | None = None,
                     denoise_steps: int | None = None) -> TrainConfig:
        raw = self.raw
        try:
            return TrainConfig(
                episodes=raw["train.episodes"] if episodes is None else episodes,
                rounds_per_episode=raw["train.rounds"],
                steps_per_round=raw["train.steps"],
                batch_size=raw["train.batch_size"],
                denoise_steps=raw["train.denoise_steps"] if denoise_steps is None else denoise_steps,
                buffer_capacity=raw["train.buffer_capacity"],
                actor_lr=raw["train.actor_lr"],
                critic_lr=raw["train.critic_lr"],
                tau=raw["train.soft_update_tau"],
                discount=raw["train.discount"],
                weight_decay=raw["train.weight_decay"],
                history_len=raw["env.history_len"],
                hidden_units=tuple(raw["train.hidden_units"]),
                time_embed_dim=raw["train.time_embed_dim"],
                explore_scale=raw["train.explore_scale"],
                explore_decay=raw["train.explore_decay"],
                bootstrap_critic=raw["train.bootstrap_critic"],
                reset_buffer_each_episode=raw["train.reset_buffer_each_episode"],
                seed=raw["run.seed"] if seed is None else seed,
                dtype=raw["train.dtype"],
            )
        except ValueError as exc:
            raise ConfigError(f"invalid training parameters: {exc}") from exc

    # -- identity -------------------------------------------------------------

    def canonical_text(self) -> str:
        lines = []
        for key in sorted(self.raw):
            value = self.raw[key]
            if isinstance(value, list):
                rendered = " ".join(repr(v) for v in value)
            else:
                rendered = repr(value)
            lines.append(f"{key} = {rendered}")
        return "\n".join(lines) + "\n"

    def content_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:12]


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Resolve defaults, an optional config file, and explicit overrides.

    Validates by constructing the market and training configs once, so any
    invariant violation surfaces before a run starts.
    """
    raw = dict(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        raw.update(parse_config_text(text))
    if overrides:
        for key in overrides:
            if key not in DEFAULTS:
                raise ConfigError(f"unknown key {key!r}")
        raw.update(overrides)
    if raw["sweep.axis"] not in ("unit_cost", "user_count", "denoising_steps"):
        raise ConfigError(f"unknown sweep.axis {raw['sweep.axis']!r}")
    if raw["train.dtype"] not in ("float32", "float64"):
        raise ConfigError(f"train.dtype must be float32 or float64, got {raw['train.dtype']!r}")
    if raw["sweep.seeds"] < 1 or not raw["sweep.values"]:
        raise ConfigError("sweep.seeds must be >= 1 and sweep.values non-empty")
    cfg = ExperimentConfig(raw=raw)
    cfg.market()
    cfg.train_config()
    return cfg
