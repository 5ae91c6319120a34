"""Multi-critic PPO trainer.

One iteration collects ``steps_per_env`` transitions from every
environment, computes per-group GAE, aggregates batch-normalized
advantages with the configured weights, then runs the clipped-surrogate
update (policy + per-group value regression + smoothness regularization +
entropy) over the configured epochs and minibatches.  Target critics track
the online critics by a soft update each iteration.

All randomness derives from the root seed through fixed stream labels:
(seed, 0) environments, (seed, 1) network initialization, (seed, 2) action
sampling, (seed, 3) minibatch shuffling, (seed, 4) interpolation draws.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import os
import time
from dataclasses import dataclass

import numpy as np

from ..config import EnvConfig, TrainConfig
from ..env import StandupVecEnv
from ..env.observation import ObservationLayout
from ..env.rewards import GROUP_NAMES
from ..physics.model import RobotModel, SimulationFault
from .adam import Adam
from .gae import compute_gae, aggregate_advantages
from .losses import combined_minibatch_update
from .mlp import MLP
from .policy import GaussianPolicy

log = logging.getLogger(__name__)


def _stream(seed: int, label: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, label])))


@dataclass
class IterationReport:
    iteration: int
    policy_loss: float
    value_losses: tuple
    l2c2_value: float
    entropy: float
    approx_kl: float
    clip_fraction: float
    grad_norm: float
    reward_mean: float
    group_reward_means: tuple
    episodes_finished: int
    success_rate: float
    h_head_end_mean: float
    pull_force: float
    beta: float
    faults: int
    wall_time: float

    HEADER = ("iteration", "policy_loss",
              *(f"value_loss_{g}" for g in GROUP_NAMES), "l2c2",
              "entropy", "approx_kl", "clip_fraction", "grad_norm",
              "reward_mean", *(f"reward_{g}" for g in GROUP_NAMES),
              "episodes", "success_rate", "h_head_end", "pull_force", "beta",
              "faults")

    def row(self) -> list:
        vl = list(self.value_losses) + [float("nan")] * (4 - len(self.value_losses))
        gr = list(self.group_reward_means)
        return [self.iteration, repr(self.policy_loss), *(repr(v) for v in vl),
                repr(self.l2c2_value), repr(self.entropy), repr(self.approx_kl),
                repr(self.clip_fraction), repr(self.grad_norm),
                repr(self.reward_mean), *(repr(g) for g in gr),
                self.episodes_finished, repr(self.success_rate),
                repr(self.h_head_end_mean), repr(self.pull_force),
                repr(self.beta), self.faults]


class Trainer:
    def __init__(self, model: RobotModel, env_cfg: EnvConfig,
                 train_cfg: TrainConfig, seed: int,
                 out_dir: str | None = None):
        env_cfg.validate()
        train_cfg.validate()
        self.model = model
        self.env_cfg = env_cfg
        self.cfg = train_cfg
        self.seed = seed
        self.out_dir = out_dir

        self.env = StandupVecEnv(model, env_cfg, train_cfg.num_envs, seed=seed)
        layout = ObservationLayout(model.n_joints, env_cfg.history_length)
        self.obs_dim = layout.obs_dim
        input_scale = layout.policy_input_scales()

        init_rng = _stream(seed, 1)
        dtype = np.dtype(train_cfg.network_dtype)
        self.policy = GaussianPolicy(
            self.obs_dim, model.n_joints, train_cfg.policy_hidden, init_rng,
            activation=train_cfg.activation, log_std_init=train_cfg.log_std_init,
            log_std_bounds=(train_cfg.log_std_min, train_cfg.log_std_max),
            input_scale=input_scale, dtype=dtype)
        self.n_groups = 1 if train_cfg.single_critic else 4
        self.critics = [
            MLP([self.obs_dim] + list(train_cfg.critic_hidden) + [1], init_rng,
                activation=train_cfg.activation, input_scale=input_scale,
                dtype=dtype)
            for _ in range(self.n_groups)]
        self.target_critics = [c.copy() for c in self.critics]

        params = list(self.policy.param_arrays())
        for c in self.critics:
            params += c.param_arrays()
        self.adam = Adam(params, lr=train_cfg.learning_rate,
                         grad_clip=train_cfg.grad_clip)

        self.sample_rng = _stream(seed, 2)
        self.shuffle_rng = _stream(seed, 3)
        self.l2c2_rng = _stream(seed, 4)

        self.iteration = 0
        self._obs: np.ndarray | None = None
        self._log_writer = None
        self._log_file = None
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            self.open_log()

    # ------------------------------------------------------------- logging

    @property
    def log_path(self) -> str:
        return os.path.join(self.out_dir, "training_log.csv")

    def open_log(self) -> None:
        exists = os.path.exists(self.log_path)
        self._log_file = open(self.log_path, "a", newline="")
        self._log_writer = csv.writer(self._log_file)
        if not exists:
            self._log_writer.writerow(IterationReport.HEADER)
            self._log_file.flush()

    def close(self) -> None:
        if self._log_file is not None:
            self._log_file.close()
            self._log_file = None
            self._log_writer = None

    # ---------------------------------------------------------- collection

    def _collect(self):
        cfg = self.cfg
        T, N, G = cfg.steps_per_env, cfg.num_envs, self.n_groups
        if self._obs is None:
            self._obs = self.env.reset_all()
        obs_buf = np.zeros((T, N, self.obs_dim))
        next_obs_buf = np.zeros((T, N, self.obs_dim))
        act_buf = np.zeros((T, N, self.model.n_joints))
        logp_buf = np.zeros((T, N))
        rew_buf = np.zeros((T, N, G))
        done_buf = np.zeros((T, N), dtype=bool)
        val_buf = np.zeros((T, N, G))
        successes: list[bool] = []
        heads: list[float] = []
        faults = 0
        raw_reward_sum = 0.0
        raw_group_sum = np.zeros(4)

        obs = self._obs
        for t in range(T):
            obs_buf[t] = obs
            for g, critic in enumerate(self.critics):
                val_buf[t, :, g] = critic(obs)[:, 0]
            actions, logp = self.policy.sample(obs, self.sample_rng)
            act_buf[t] = actions
            logp_buf[t] = logp
            obs, groups, reward, done, info = self.env.step(actions)
            if G == 1:
                rew_buf[t, :, 0] = reward
            else:
                rew_buf[t] = groups
            raw_reward_sum += float(reward.sum())
            raw_group_sum += groups.sum(axis=0)
            if cfg.bootstrap_timeouts:
                # episodes cut by the time limit (not faults) keep their
                # value through the boundary, as in standard PPO rollouts
                to = info["time_out"]
                if to.any():
                    rew_buf[t][to] += cfg.gamma * val_buf[t][to]
            done_buf[t] = done
            next_obs_buf[t] = obs
            faults += int(info["fault"].sum())
            if "episode_success" in info:
                successes.extend(bool(s) for s in info["episode_success"])
                heads.extend(float(h) for h in info["episode_h_head"])
        self._obs = obs

        bootstrap = np.zeros((N, G))
        for g, critic in enumerate(self.critics):
            bootstrap[:, g] = critic(obs)[:, 0]
        return {
            "obs": obs_buf, "next_obs": next_obs_buf, "actions": act_buf,
            "logp": logp_buf, "rewards": rew_buf, "dones": done_buf,
            "values": val_buf, "bootstrap": bootstrap,
            "successes": successes, "heads": heads, "faults": faults,
            "raw_reward_mean": raw_reward_sum / (T * N),
            "raw_group_means": raw_group_sum / (T * N),
        }

    # -------------------------------------------------------------- update

    def train_iteration(self) -> IterationReport:
        t_start = time.perf_counter()
        cfg = self.cfg
        batch = self._collect()
        T, N, G = cfg.steps_per_env, cfg.num_envs, self.n_groups
        B = T * N

        advantages = np.zeros((G, B))
        targets = np.zeros((G, B))
        for g in range(G):
            adv, targ = compute_gae(
                batch["rewards"][:, :, g], batch["values"][:, :, g],
                batch["bootstrap"][:, g], batch["dones"],
                cfg.gamma, cfg.gae_lambda)
            advantages[g] = adv.reshape(B)
            targets[g] = targ.reshape(B)
        weights = (np.ones(1) if G == 1
                   else np.asarray(cfg.advantage_weights, dtype=float))
        agg_adv = aggregate_advantages(advantages, weights)

        obs = batch["obs"].reshape(B, -1)
        next_obs = batch["next_obs"].reshape(B, -1)
        actions = batch["actions"].reshape(B, -1)
        logp_old = batch["logp"].reshape(B)
        rewards_flat = batch["rewards"].reshape(B, G)
        dones_flat = batch["dones"].reshape(B)

        sums = {"policy": 0.0, "l2c2": 0.0, "kl": 0.0, "clip": 0.0, "norm": 0.0}
        value_losses = np.zeros(G)
        n_updates = 0
        mb_size = B // cfg.minibatches
        for _ in range(cfg.epochs):
            perm = self.shuffle_rng.permutation(B)
            for k in range(cfg.minibatches):
                idx = perm[k * mb_size:(k + 1) * mb_size]
                u = self.l2c2_rng.uniform(0.0, 1.0, (idx.size, 1))
                grads, pol_loss, vlosses, l2c2_value, stats = \
                    combined_minibatch_update(
                        self.policy, self.critics, self.target_critics,
                        obs[idx], actions[idx], logp_old[idx], agg_adv[idx],
                        targets[:, idx], next_obs[idx], rewards_flat[idx],
                        dones_flat[idx], u, cfg)
                value_losses += vlosses
                if not (np.isfinite(pol_loss) and np.all(np.isfinite(vlosses))
                        and np.isfinite(l2c2_value)):
                    raise SimulationFault(
                        "non-finite loss; iteration aborted before the update")
                if cfg.adaptive_lr and cfg.desired_kl > 0:
                    kl = stats["approx_kl"]
                    if kl > 2.0 * cfg.desired_kl:
                        self.adam.lr = max(1e-5, self.adam.lr / 1.5)
                    elif 0.0 < kl < 0.5 * cfg.desired_kl:
                        self.adam.lr = min(1e-2, self.adam.lr * 1.5)
                norm = self.adam.step(grads)
                self.policy.clamp_log_std()
                sums["policy"] += pol_loss
                sums["l2c2"] += l2c2_value
                sums["kl"] += stats["approx_kl"]
                sums["clip"] += stats["clip_fraction"]
                sums["norm"] += norm
                n_updates += 1

        rate = cfg.target_update_rate
        for critic, target in zip(self.critics, self.target_critics):
            for p, tp in zip(critic.param_arrays(), target.param_arrays()):
                tp += rate * (p - tp)

        self.iteration += 1
        group_means = batch["raw_group_means"]
        succ = batch["successes"]
        report = IterationReport(
            iteration=self.iteration,
            policy_loss=sums["policy"] / n_updates,
            value_losses=tuple(value_losses / n_updates),
            l2c2_value=sums["l2c2"] / n_updates,
            entropy=self.policy.entropy(),
            approx_kl=sums["kl"] / n_updates,
            clip_fraction=sums["clip"] / n_updates,
            grad_norm=sums["norm"] / n_updates,
            reward_mean=batch["raw_reward_mean"],
            group_reward_means=tuple(group_means),
            episodes_finished=len(succ),
            success_rate=(float(np.mean(succ)) if succ else float("nan")),
            h_head_end_mean=(float(np.mean(batch["heads"])) if batch["heads"]
                             else float("nan")),
            pull_force=self.env.curriculum.pull_force,
            beta=self.env.curriculum.beta,
            faults=batch["faults"],
            wall_time=time.perf_counter() - t_start,
        )
        if self._log_writer is not None:
            self._log_writer.writerow(report.row())
            self._log_file.flush()
        return report

    def run(self, iterations: int, checkpoint_interval: int | None = None,
            quiet: bool = True) -> list[IterationReport]:
        from .checkpoint import save_checkpoint
        interval = checkpoint_interval or self.cfg.checkpoint_interval
        reports = []
        for _ in range(iterations):
            report = self.train_iteration()
            reports.append(report)
            if not quiet:
                log.info("iter %d reward %.2f succ %.2f force %.0f beta %.2f",
                         report.iteration, report.reward_mean,
                         report.success_rate, report.pull_force, report.beta)
            if self.out_dir and interval and self.iteration % interval == 0:
                save_checkpoint(
                    os.path.join(self.out_dir, f"checkpoint_{self.iteration:06d}.npz"),
                    self)
        if self.out_dir:
            save_checkpoint(os.path.join(self.out_dir, "checkpoint_final.npz"), self)
        return reports

    # --------------------------------------------------------------- eval

    def policy_fn(self):
        """Deterministic policy callable (mean action, clipped)."""
        policy = self.policy

        def act(obs: np.ndarray) -> np.ndarray:
            return np.clip(policy.mean(obs), -1.0, 1.0)
        return act
