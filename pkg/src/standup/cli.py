"""Command-line entry point.

Commands: train, evaluate, robustness, export, validate.  Exit codes:
0 success, 1 usage/configuration error, 2 runtime fault.  All randomness
derives from --seed; training runs a single coordinator process (the
environment batch provides the parallelism), while evaluate/robustness can
spread repetitions over --workers processes with a worker-count-independent
reduction.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .config import (ConfigError, EnvConfig, TrainConfig, load_env_config,
                     load_train_config, config_hash)
from .physics.model import RobotModel, SimulationFault


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    p = _Parser(prog="standup",
                description="Planar stand-up control: training and evaluation")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--model", help="robot model JSON (default: built-in)")
        sp.add_argument("--seed", type=int, default=0)

    t = sub.add_parser("train", help="run PPO training")
    common(t)
    t.add_argument("--env-config", help="environment config JSON")
    t.add_argument("--train-config", help="training config JSON")
    t.add_argument("--out", required=True, help="output directory")
    t.add_argument("--iterations", type=int, help="override the config budget")
    t.add_argument("--resume", help="checkpoint to resume from")
    t.add_argument("--workers", type=int, default=1,
                   help="accepted for symmetry; training is one coordinator")
    t.add_argument("--single-critic", action="store_true",
                   help="ablation: one critic over the summed group reward")
    t.add_argument("--no-force", action="store_true",
                   help="ablation: disable the assist-force curriculum")
    t.add_argument("--no-l2c2", action="store_true",
                   help="ablation: disable smoothness regularization")
    t.add_argument("--fixed-beta", type=float,
                   help="ablation: fixed action bound, no curriculum")
    t.add_argument("--history", type=int, choices=(1, 2, 5, 10),
                   help="ablation: observation history length")
    t.add_argument("--no-style-rewards", action="store_true",
                   help="ablation: drop the style reward group")

    e = sub.add_parser("evaluate", help="run the evaluation protocol")
    common(e)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--terrains", nargs="+",
                   help="terrains to evaluate (default: training mix)")
    e.add_argument("--repetitions", type=int, default=5)
    e.add_argument("--episodes", type=int, default=250)
    e.add_argument("--workers", type=int, default=1)

    r = sub.add_parser("robustness", help="disturbance sweeps")
    common(r)
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--kind", required=True,
                   choices=("com_offset_x", "sagittal_force",
                            "init_joint_offset", "torque_dropout"))
    r.add_argument("--magnitudes", type=float, nargs="+", required=True)
    r.add_argument("--episodes", type=int, default=100)
    r.add_argument("--terrain", default="ground")

    x = sub.add_parser("export", help="export episode traces as CSV")
    common(x)
    x.add_argument("--checkpoint", required=True)
    x.add_argument("--out", required=True)
    x.add_argument("--episodes", type=int, default=5)
    x.add_argument("--terrain", default="ground")

    v = sub.add_parser("validate", help="check configuration files")
    common(v)
    v.add_argument("--env-config")
    v.add_argument("--train-config")
    return p


def _load_model(args) -> RobotModel:
    return RobotModel.from_json(args.model) if args.model else RobotModel.default()


def _apply_ablations(args, env_cfg: EnvConfig, train_cfg: TrainConfig) -> None:
    if args.no_force:
        env_cfg.force_curriculum = False
    if args.fixed_beta is not None:
        env_cfg.fixed_beta = args.fixed_beta
    if args.history is not None:
        env_cfg.history_length = args.history
    if args.no_style_rewards:
        env_cfg.style_rewards = False
    if args.single_critic:
        train_cfg.single_critic = True
    if args.no_l2c2:
        train_cfg.l2c2 = False
    if args.iterations is not None:
        train_cfg.iterations = args.iterations
    env_cfg.validate()
    train_cfg.validate()


def cmd_train(args) -> int:
    from .learn import Trainer
    from .learn.checkpoint import load_checkpoint

    if args.resume:
        trainer = load_checkpoint(args.resume, out_dir=args.out)
        budget = args.iterations if args.iterations else trainer.cfg.iterations
    else:
        env_cfg = load_env_config(args.env_config)
        train_cfg = load_train_config(args.train_config)
        _apply_ablations(args, env_cfg, train_cfg)
        trainer = Trainer(_load_model(args), env_cfg, train_cfg,
                          seed=args.seed, out_dir=args.out)
        budget = train_cfg.iterations
    try:
        reports = trainer.run(iterations=budget)
    except SimulationFault as exc:
        from .learn.checkpoint import save_checkpoint
        save_checkpoint(os.path.join(args.out, "checkpoint_fault.npz"), trainer)
        print(f"simulation fault: {exc}; checkpoint preserved", file=sys.stderr)
        return 2
    finally:
        trainer.close()
    last = reports[-1]
    print(f"trained {len(reports)} iterations "
          f"(total {trainer.iteration}); final reward {last.reward_mean:.2f}, "
          f"success {last.success_rate:.2f}, pull force {last.pull_force:.0f} N, "
          f"beta {last.beta:.2f}")
    print(f"checkpoint: {os.path.join(args.out, 'checkpoint_final.npz')}")
    print(f"config hash: {config_hash(trainer.env_cfg, trainer.cfg)}")
    return 0


def _load_for_eval(args):
    from .learn.checkpoint import load_checkpoint
    trainer = load_checkpoint(args.checkpoint)
    return trainer


def cmd_evaluate(args) -> int:
    from .evaluate import run_protocol

    trainer = _load_for_eval(args)
    terrains = args.terrains or trainer.env_cfg.terrains
    report = run_protocol(
        trainer.policy, trainer.model, trainer.env_cfg, terrains,
        seed=args.seed, repetitions=args.repetitions, episodes=args.episodes,
        beta=trainer.env.curriculum.beta, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    json_path = os.path.join(args.out, "metrics.json")
    with open(json_path, "w") as fh:
        fh.write(report.to_json())
    table = report.to_table()
    with open(os.path.join(args.out, "metrics.txt"), "w") as fh:
        fh.write(table + "\n")
    print(table)
    print(f"written: {json_path}")
    return 0


def cmd_robustness(args) -> int:
    from .evaluate import DisturbanceSpec, robustness_sweep
    from .evaluate.robustness import save_curve

    trainer = _load_for_eval(args)
    spec = DisturbanceSpec(args.kind, tuple(args.magnitudes))
    rows = robustness_sweep(
        trainer.policy_fn(), trainer.model, trainer.env_cfg, spec,
        seed=args.seed, terrain=args.terrain, episodes=args.episodes,
        beta=trainer.env.curriculum.beta)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"robustness_{args.kind}.csv")
    save_curve(path, args.kind, rows)
    for r in rows:
        engy = "/" if r["energy_j"] is None else f"{r['energy_j']:.1f}"
        print(f"{args.kind}={r['magnitude']:g}: success "
              f"{r['success_rate']:.3f}, energy {engy}")
    print(f"written: {path}")
    return 0


def cmd_export(args) -> int:
    import dataclasses as dc
    from .env import StandupVecEnv
    from .env.curriculum import CurriculumState
    from .env.standup_env import EvalOverrides

    trainer = _load_for_eval(args)
    cfg = dc.replace(trainer.env_cfg, terrains=[args.terrain])
    ov = EvalOverrides(noise=False, randomization=False, pull_force=False,
                       freeze_curriculum=True)
    env = StandupVecEnv(trainer.model, cfg, n_envs=args.episodes,
                        seed=args.seed, overrides=ov, record_traces=True)
    env.curriculum = CurriculumState(pull_force=0.0,
                                     beta=trainer.env.curriculum.beta)
    policy_fn = trainer.policy_fn()
    obs = env.reset_all()
    remaining = args.episodes
    while remaining > 0:
        obs, _, _, done, _ = env.step(policy_fn(obs))
        remaining -= int(done.sum())
    os.makedirs(args.out, exist_ok=True)
    for i, trace in enumerate(env.completed_traces[:args.episodes]):
        path = os.path.join(args.out, f"episode_{i:03d}.csv")
        trace.to_csv(path)
    print(f"exported {min(args.episodes, len(env.completed_traces))} traces "
          f"to {args.out}")
    return 0


def cmd_validate(args) -> int:
    env_cfg = load_env_config(args.env_config)
    train_cfg = load_train_config(args.train_config)
    model = _load_model(args)
    model.validate()
    print(f"env config ok: terrains={env_cfg.terrains} "
          f"stages=({env_cfg.h_stage1}, {env_cfg.h_stage2}) "
          f"force={env_cfg.force_init}N beta={env_cfg.beta_init}")
    print(f"train config ok: gamma={train_cfg.gamma} clip={train_cfg.clip_ratio} "
          f"epochs={train_cfg.epochs} minibatches={train_cfg.minibatches} "
          f"envs={train_cfg.num_envs}")
    print(f"model ok: {model.name}, mass {model.total_mass:.1f} kg, "
          f"{model.n_joints} joints")
    print(f"config hash: {config_hash(env_cfg, train_cfg)}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "robustness": cmd_robustness,
    "export": cmd_export,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (SimulationFault, OSError, ValueError) as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
