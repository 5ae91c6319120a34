"""Evaluation protocol: repeated episode batches per terrain.

Default shape is 5 repetitions of 250 episodes per terrain; desk-scale
runs override both.  Evaluation episodes run the deterministic policy with
observation noise, domain randomization, and the assist force all off, and
the action bound frozen at the checkpoint's value.  Repetitions can be
spread over worker processes; results reduce in repetition order, so the
report does not depend on the worker count.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..config import EnvConfig
from ..env import StandupVecEnv, EvalOverrides
from ..env.curriculum import CurriculumState
from ..physics.model import RobotModel
from ..learn.policy import GaussianPolicy
from ..env.observation import ObservationLayout
from .metrics import MetricsReport, TerrainMetrics, trace_metrics


def _eval_overrides(base: EvalOverrides | None) -> EvalOverrides:
    ov = dataclasses.replace(base) if base is not None else EvalOverrides()
    ov.noise = False
    ov.randomization = False
    ov.pull_force = False
    ov.freeze_curriculum = True
    return ov


def run_repetition(policy_fn, model: RobotModel, env_cfg: EnvConfig,
                   terrain: str, seed: int, episodes: int, beta: float,
                   overrides: EvalOverrides | None = None) -> dict:
    """One repetition: ``episodes`` episodes on one terrain; per-episode
    metrics aggregated to repetition means."""
    cfg = dataclasses.replace(env_cfg, terrains=[terrain])
    env = StandupVecEnv(model, cfg, n_envs=episodes, seed=seed,
                        overrides=_eval_overrides(overrides), record_traces=True)
    env.curriculum = CurriculumState(pull_force=0.0, beta=beta)
    obs = env.reset_all()
    remaining = episodes
    while remaining > 0:
        obs, _, _, done, info = env.step(policy_fn(obs))
        remaining -= int(done.sum())
    traces = env.completed_traces[:episodes]
    h_targ = cfg.h_targ[terrain]
    per_ep = [trace_metrics(t, h_targ, cfg.h_stage2) for t in traces]
    succ = [m["success"] for m in per_ep]
    feet = [m["feet"] for m in per_ep if m["feet"] is not None]
    engy = [m["energy"] for m in per_ep if m["energy"] is not None]
    smth = [m["smoothness"] for m in per_ep]
    return {
        "episodes": episodes,
        "success": float(np.mean(succ)),
        "feet": float(np.mean(feet)) if feet else None,
        "energy": float(np.mean(engy)) if engy else None,
        "smoothness": float(np.mean(smth)),
    }


def _worker(args) -> dict:
    (model_dict, env_cfg_dict, policy_blob, terrain, seed, episodes,
     beta, overrides_dict) = args
    model = RobotModel.from_dict(model_dict)
    env_cfg = EnvConfig(**env_cfg_dict)
    policy = _policy_from_blob(policy_blob, model, env_cfg)
    overrides = EvalOverrides(**overrides_dict)

    def policy_fn(obs):
        return np.clip(policy.mean(obs), -1.0, 1.0)

    return run_repetition(policy_fn, model, env_cfg, terrain, seed, episodes,
                          beta, overrides)


def _policy_blob(policy: GaussianPolicy) -> dict:
    return {
        "sizes": policy.mlp.sizes,
        "activation": policy.mlp.activation,
        "params": [p.copy() for p in policy.mlp.param_arrays()],
        "log_std": policy.log_std.copy(),
    }


def _policy_from_blob(blob: dict, model: RobotModel,
                      env_cfg: EnvConfig) -> GaussianPolicy:
    layout = ObservationLayout(model.n_joints, env_cfg.history_length)
    sizes = blob["sizes"]
    policy = GaussianPolicy(sizes[0], sizes[-1], sizes[1:-1],
                            np.random.default_rng(0),
                            activation=blob["activation"],
                            input_scale=layout.policy_input_scales())
    for p, saved in zip(policy.mlp.param_arrays(), blob["params"]):
        p[...] = saved
    policy.log_std[...] = blob["log_std"]
    return policy


def run_protocol(policy, model: RobotModel, env_cfg: EnvConfig,
                 terrains: list[str], seed: int, repetitions: int = 5,
                 episodes: int = 250, beta: float = 1.0,
                 overrides: EvalOverrides | None = None,
                 workers: int = 1) -> MetricsReport:
    """Full protocol over the requested terrains.

    ``policy`` is either a deterministic callable obs -> actions (single
    process only) or a GaussianPolicy (required for workers > 1).
    """
    per_terrain: dict[str, TerrainMetrics] = {}
    jobs = [(terrain, rep) for terrain in terrains for rep in range(repetitions)]
    seeds = {job: seed * 100003 + 977 * KINDS_INDEX[job[0]] + job[1]
             for job in jobs}

    if workers > 1:
        if not isinstance(policy, GaussianPolicy):
            raise TypeError("worker-parallel evaluation needs a GaussianPolicy")
        blob = _policy_blob(policy)
        ov = dataclasses.asdict(overrides) if overrides else dataclasses.asdict(
            EvalOverrides())
        args = [(model.to_dict(), dataclasses.asdict(env_cfg), blob, t,
                 seeds[(t, r)], episodes, beta, ov) for t, r in jobs]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_worker, args))
    else:
        if isinstance(policy, GaussianPolicy):
            pol = policy

            def policy_fn(obs):
                return np.clip(pol.mean(obs), -1.0, 1.0)
        else:
            policy_fn = policy
        results = [run_repetition(policy_fn, model, env_cfg, t, seeds[(t, r)],
                                  episodes, beta, overrides)
                   for t, r in jobs]

    for ti, terrain in enumerate(terrains):
        reps = results[ti * repetitions:(ti + 1) * repetitions]
        per_terrain[terrain] = TerrainMetrics.from_repetitions(terrain, reps)
    return MetricsReport(terrains=per_terrain, seed=seed,
                         meta={"repetitions": repetitions, "episodes": episodes,
                               "beta": beta})


KINDS_INDEX = {"ground": 0, "platform": 1, "wall": 2, "slope": 3}
