"""Command line front end: experiment orchestration and CSV emission.

Subcommands: equilibrium, train, evaluate, sweep, metrics, extract.
Every CSV embeds the package version, the config content hash, and the seed
in leading comment lines; re-running a command with identical inputs
reproduces the files byte for byte.  Measured wall-clock times are never
deterministic, so they go to `*_timing.csv` sidecars instead of the main
tables.

Exit codes: 0 success, 2 invalid configuration, 3 market collapse,
4 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__, agent, metrics as metrics_mod, pnm
from .config import ConfigError, ExperimentConfig, load_config
from .env import reset, run_baseline, step
from .game import (
    MarketCollapseError,
    brute_force_equilibrium,
    closed_form_price,
    equilibrium,
    printed_formula_price,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COLLAPSE = 3
EXIT_IO = 4


def _meta_lines(cfg: ExperimentConfig, seed) -> list[str]:
    return [
        f"# version={__version__} config_hash={cfg.content_hash()} seed={seed}",
        "# units: price per MHz, bandwidth MHz, payload Mbit",
    ]


def _write_csv(path, meta: list[str], header: list[str], rows):
    """Atomic CSV write; floats rendered with repr for bit-stable output."""
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        for line in meta:
            fh.write(line + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    os.replace(tmp, path)


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


# -- subcommands --------------------------------------------------------------


def cmd_equilibrium(args, cfg: ExperimentConfig) -> int:
    market = cfg.market()
    seed = args.seed if args.seed is not None else cfg["run.seed"]
    derived = closed_form_price(market)
    printed = printed_formula_price(market)
    oracle = brute_force_equilibrium(market, cfg["game.grid_points"])
    eq = equilibrium(market)
    print(f"closed-form price (derived)   : {derived:.6f}")
    print(f"closed-form price (as printed): {printed:.6f}")
    print(f"grid-search price             : {oracle.price:.6f}  utility {oracle.leader_utility:.6f}")
    print(f"equilibrium price             : {eq.price:.6f}  utility {eq.leader_utility:.6f}")
    for i, (b, u) in enumerate(zip(eq.demands, eq.follower_utilities)):
        print(f"  user {i}: demand {b:.6f} MHz  utility {u:.6f}")
    rows = [
        ("closed_form_price", "", float(derived)),
        ("printed_formula_price", "", float(printed)),
        ("grid_price", "", float(oracle.price)),
        ("grid_leader_utility", "", float(oracle.leader_utility)),
        ("equilibrium_price", "", float(eq.price)),
        ("leader_utility", "", float(eq.leader_utility)),
    ]
    rows += [("demand_mhz", i, float(b)) for i, b in enumerate(eq.demands)]
    rows += [("follower_utility", i, float(u)) for i, u in enumerate(eq.follower_utilities)]
    _write_csv(os.path.join(_outdir(args), "equilibrium.csv"),
               _meta_lines(cfg, seed), ["record", "index", "value"], rows)
    return EXIT_OK


def _train_once(cfg: ExperimentConfig, seed: int, episodes=None, denoise_steps=None,
                market=None, resume_path=None):
    market = cfg.market() if market is None else market
    tc = cfg.train_config(seed=seed, episodes=episodes, denoise_steps=denoise_steps)
    if resume_path and os.path.exists(resume_path):
        trainer = agent.GdmTrainer.load(resume_path, market)
    else:
        trainer = agent.GdmTrainer(market, tc)
    if trainer.episodes_done < tc.episodes:
        trainer.run(tc.episodes - trainer.episodes_done)
    return agent.TrainResult(trainer=trainer, curves=trainer.curves, log_rows=trainer.log_rows)


def cmd_train(args, cfg: ExperimentConfig) -> int:
    out = _outdir(args)
    seed = args.seed if args.seed is not None else cfg["run.seed"]
    ckpt = os.path.join(out, "checkpoint.npz")
    result = _train_once(cfg, seed, resume_path=ckpt if args.resume else None)
    result.trainer.save(ckpt)
    meta = _meta_lines(cfg, seed)
    _write_csv(os.path.join(out, "curves.csv"), meta,
               ["episode", "mean_reward", "critic_loss", "actor_loss"],
               [(c.episode, c.mean_reward, c.critic_loss, c.actor_loss) for c in result.curves])
    _write_csv(os.path.join(out, "curves_timing.csv"), meta, ["episode", "wall_ms"],
               [(c.episode, c.wall_ms) for c in result.curves])
    result.episode_log(cfg.content_hash()).write_csv(
        os.path.join(out, "episode_log.csv"), version=__version__)
    window = cfg["train.final_window"]
    final = result.final_mean_reward(window)
    oracle = equilibrium(result.trainer.market).leader_utility
    print(f"trained {result.trainer.episodes_done} episodes; "
          f"final-{window}-episode mean reward {final:.4f} "
          f"({final / oracle:.4f} of equilibrium utility {oracle:.4f})")
    return EXIT_OK


def cmd_evaluate(args, cfg: ExperimentConfig) -> int:
    out = _outdir(args)
    seed = args.seed if args.seed is not None else cfg["run.seed"]
    market = cfg.market()
    trainer = agent.GdmTrainer.load(args.checkpoint, market)
    state = reset(market, seed, trainer.tc.history_len)
    rng = np.random.default_rng(seed)
    price = agent.infer(trainer.policy, state, trainer.schedule, market, rng, n_draws=args.draws)
    reward, _ = step(state, price, market)
    oracle = equilibrium(market)
    print(f"inferred price {price:.6f} (equilibrium {oracle.price:.6f}); "
          f"utility {reward:.6f} ({reward / oracle.leader_utility:.4f} of equilibrium)")
    _write_csv(os.path.join(out, "evaluate.csv"), _meta_lines(cfg, seed),
               ["record", "value"],
               [("inferred_price", float(price)), ("utility", float(reward)),
                ("equilibrium_price", float(oracle.price)),
                ("equilibrium_utility", float(oracle.leader_utility))])
    return EXIT_OK


def _sweep_point(raw_cfg: dict, axis: str, value: float, seed: int) -> dict:
    """One (axis value, seed) cell: oracle, trained agent, and baselines."""
    import time as _time

    cfg = ExperimentConfig(raw=raw_cfg)
    episodes = cfg["sweep.episodes"]
    denoise = None
    if axis == "unit_cost":
        market = cfg.market(unit_cost=value)
    elif axis == "user_count":
        base = len(cfg["users.distance_m"])
        market = cfg.market(extra_users=int(value) - base)
    else:  # denoising_steps
        market = cfg.market()
        denoise = int(value)
    oracle = equilibrium(market).leader_utility
    window = cfg["train.final_window"]
    t0 = _time.perf_counter()
    result = _train_once(cfg, seed, episodes=episodes, denoise_steps=denoise, market=market)
    wall_ms = (_time.perf_counter() - t0) * 1e3
    agent_final = result.final_mean_reward(window)
    rounds = cfg["train.rounds"]
    greedy = run_baseline(market, "greedy", episodes, rounds, seed)
    rand = run_baseline(market, "random", episodes, rounds, seed)
    return {
        "value": value,
        "seed": seed,
        "oracle_utility": oracle,
        "agent_utility": agent_final,
        "agent_ratio": agent_final / oracle,
        "greedy_utility": float(greedy.episode_means()[-window:].mean()),
        "random_utility": float(rand.episode_means()[-window:].mean()),
        "wall_ms": wall_ms,
    }


def cmd_sweep(args, cfg: ExperimentConfig) -> int:
    out = _outdir(args)
    axis = cfg["sweep.axis"]
    values = cfg["sweep.values"]
    base_seed = args.seed if args.seed is not None else cfg["run.seed"]
    seeds = [base_seed + k for k in range(cfg["sweep.seeds"])]
    tasks = [(cfg.raw, axis, v, s) for v in values for s in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            cells = list(pool.map(_sweep_point_star, tasks))
    else:
        cells = [_sweep_point(*t) for t in tasks]
    cells.sort(key=lambda c: (c["value"], c["seed"]))
    meta = _meta_lines(cfg, base_seed) + [f"# sweep axis: {axis}"]
    rows = [(c["value"], c["seed"], c["oracle_utility"], c["agent_utility"],
             c["agent_ratio"], c["greedy_utility"], c["random_utility"]) for c in cells]
    for v in values:
        sub = np.array([c["agent_utility"] for c in cells if c["value"] == v])
        oracle = next(c["oracle_utility"] for c in cells if c["value"] == v)
        rows.append((v, "mean", oracle, float(sub.mean()), float(sub.mean() / oracle),
                     "", ""))
        rows.append((v, "std", oracle, float(sub.std()), "", "", ""))
    _write_csv(os.path.join(out, "sweep.csv"), meta,
               ["axis_value", "seed", "oracle_utility", "agent_utility",
                "agent_ratio", "greedy_utility", "random_utility"], rows)
    _write_csv(os.path.join(out, "sweep_timing.csv"), meta,
               ["axis_value", "seed", "train_wall_ms"],
               [(c["value"], c["seed"], c["wall_ms"]) for c in cells])
    for v in values:
        sub = [c for c in cells if c["value"] == v]
        print(f"{axis}={v}: oracle {sub[0]['oracle_utility']:.4f}  "
              f"agent {np.mean([c['agent_utility'] for c in sub]):.4f}  "
              f"greedy {np.mean([c['greedy_utility'] for c in sub]):.4f}  "
              f"random {np.mean([c['random_utility'] for c in sub]):.4f}")
    return EXIT_OK


def _sweep_point_star(t):
    return _sweep_point(*t)


def cmd_metrics(args, cfg: ExperimentConfig) -> int:
    img_a, _ = pnm.read_pnm(args.image_a)
    img_b, maxval = pnm.read_pnm(args.image_b)
    err = metrics_mod.mse(img_a, img_b)
    sim = metrics_mod.ssim(img_a, img_b, max_value=maxval, windowed=args.windowed)
    try:
        peak = metrics_mod.psnr(img_a, img_b, max_value=maxval)
        peak_text = repr(float(peak))
    except metrics_mod.IdenticalImagesError:
        peak_text = "identical"
    print(f"MSE  : {err!r}")
    print(f"PSNR : {peak_text}")
    print(f"SSIM : {sim!r}")
    _write_csv(os.path.join(_outdir(args), "metrics.csv"),
               _meta_lines(cfg, args.seed if args.seed is not None else cfg["run.seed"]),
               ["metric", "value"],
               [("mse", float(err)), ("psnr", peak_text), ("ssim", float(sim))])
    return EXIT_OK


def cmd_extract(args, cfg: ExperimentConfig) -> int:
    image, maxval = pnm.read_pnm(args.image)
    result = metrics_mod.extract(image, args.rate, max_value=maxval)
    output = args.output
    if output is None:
        stem, ext = os.path.splitext(os.path.basename(args.image))
        output = os.path.join(_outdir(args), f"{stem}_r{args.rate:g}{ext or '.pgm'}")
    pnm.write_pnm(output, result, maxval=maxval)
    print(f"extracted {image.shape} -> {result.shape} at rate {args.rate:g}: {output}")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semcom-market",
        description="Bandwidth-market experiments: equilibria, diffusion-policy training, metrics.",
    )
    parser.add_argument("--config", help="path to a key = value config file")
    parser.add_argument("--seed", type=int, default=None, help="override run.seed")
    parser.add_argument("--out", default="out", help="output directory (default: out)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for sweeps")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("equilibrium", help="closed-form and grid-search market solution")
    p_train = sub.add_parser("train", help="train the diffusion pricing policy")
    p_train.add_argument("--resume", action="store_true",
                         help="continue from <out>/checkpoint.npz if present")
    p_eval = sub.add_parser("evaluate", help="run a trained checkpoint against the market")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--draws", type=int, default=16)
    sub.add_parser("sweep", help="run the configured parameter sweep")
    p_metrics = sub.add_parser("metrics", help="MSE/PSNR/SSIM between two anymap images")
    p_metrics.add_argument("image_a")
    p_metrics.add_argument("image_b")
    p_metrics.add_argument("--windowed", action="store_true", help="8x8 sliding-window SSIM")
    p_extract = sub.add_parser("extract", help="bicubic extraction at a compression rate")
    p_extract.add_argument("image")
    p_extract.add_argument("--rate", type=float, required=True)
    p_extract.add_argument("--output", default=None)
    return parser


_COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "metrics": cmd_metrics,
    "extract": cmd_extract,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MarketCollapseError as exc:
        print(f"market collapse: {exc}", file=sys.stderr)
        return EXIT_COLLAPSE
    except (OSError, pnm.PnmError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
