"""Diagonal-Gaussian policy over joint-space actions.

The MLP outputs the action mean; a state-independent log standard
deviation (clamped to a configured interval) completes the distribution.
Sampled actions are clipped to [-1, 1] by the environment; log-probs are
computed for the unclipped sample.
"""

from __future__ import annotations

import numpy as np

from .mlp import MLP

LOG_2PI = float(np.log(2.0 * np.pi))


class GaussianPolicy:
    def __init__(self, obs_dim: int, act_dim: int, hidden: list[int],
                 rng: np.random.Generator, activation: str = "elu",
                 log_std_init: float = 0.0,
                 log_std_bounds: tuple[float, float] = (-4.0, 1.0),
                 input_scale: np.ndarray | None = None,
                 dtype: np.dtype = np.float64):
        self.mlp = MLP([obs_dim] + list(hidden) + [act_dim], rng,
                       activation=activation, out_scale=0.01,
                       input_scale=input_scale, dtype=dtype)
        self.act_dim = act_dim
        self.log_std = np.full(act_dim, float(log_std_init))
        self.log_std_bounds = log_std_bounds

    # ------------------------------------------------------------- params

    def param_arrays(self) -> list[np.ndarray]:
        return self.mlp.param_arrays() + [self.log_std]

    def zero_grads(self) -> list[np.ndarray]:
        return [np.zeros_like(p) for p in self.param_arrays()]

    def clamp_log_std(self) -> None:
        np.clip(self.log_std, *self.log_std_bounds, out=self.log_std)

    def copy(self) -> "GaussianPolicy":
        clone = GaussianPolicy.__new__(GaussianPolicy)
        clone.mlp = self.mlp.copy()
        clone.act_dim = self.act_dim
        clone.log_std = self.log_std.copy()
        clone.log_std_bounds = self.log_std_bounds
        return clone

    # ----------------------------------------------------------- sampling

    def mean(self, obs: np.ndarray) -> np.ndarray:
        return self.mlp(obs)

    def sample(self, obs: np.ndarray, rng: np.random.Generator):
        mean = self.mlp(obs)
        std = np.exp(self.log_std)
        actions = mean + std * rng.standard_normal(mean.shape)
        return actions, self.log_prob(mean, actions)

    def log_prob(self, mean: np.ndarray, actions: np.ndarray) -> np.ndarray:
        std = np.exp(self.log_std)
        zs = (actions - mean) / std
        return -0.5 * np.sum(zs * zs, axis=1) - np.sum(self.log_std) \
            - 0.5 * self.act_dim * LOG_2PI

    def entropy(self) -> float:
        return float(np.sum(self.log_std) + 0.5 * self.act_dim * (1.0 + LOG_2PI))

    # gradients of log pi(a|s) with respect to the mean and log-std, used by
    # the surrogate loss backward pass
    def log_prob_grads(self, mean: np.ndarray, actions: np.ndarray):
        var = np.exp(2.0 * self.log_std)
        diff = actions - mean
        d_mean = diff / var                      # (B, J)
        d_log_std = diff * diff / var - 1.0      # (B, J)
        return d_mean, d_log_std
