"""Generalized advantage estimation and multi-critic aggregation."""

from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)

_STD_FLOOR = 1e-8


def compute_gae(rewards: np.ndarray, values: np.ndarray, bootstrap: np.ndarray,
                dones: np.ndarray, gamma: float, lam: float):
    """Standard GAE recursion over a (T, N) rollout.

    ``values`` are the critic predictions at each visited state and
    ``bootstrap`` the prediction for the state after the final step; done
    flags cut both the bootstrap and the advantage propagation.  Returns
    (advantages, value targets) with targets = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=bool)
    if rewards.shape != values.shape or rewards.shape != dones.shape:
        raise ValueError("rewards, values and dones must share a (T, N) shape")
    if bootstrap.shape != rewards.shape[1:]:
        raise ValueError("bootstrap must match the environment axis")
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    next_value = bootstrap
    carry = np.zeros_like(bootstrap)
    for t in range(T - 1, -1, -1):
        alive = ~dones[t]
        delta = rewards[t] + gamma * next_value * alive - values[t]
        carry = delta + gamma * lam * alive * carry
        adv[t] = carry
        next_value = values[t]
    return adv, adv + values


def aggregate_advantages(advantages: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted sum of per-group batch-normalized advantages.

    ``advantages`` is (G, B).  A group with (near-)zero standard deviation
    carries no gradient information; it contributes zero and is logged.
    """
    advantages = np.asarray(advantages, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if advantages.ndim != 2 or advantages.shape[0] != weights.shape[0]:
        raise ValueError("advantages must be (G, B) matching weights (G,)")
    out = np.zeros(advantages.shape[1])
    for g in range(advantages.shape[0]):
        std = advantages[g].std()
        if std < _STD_FLOOR:
            log.info("advantage group %d is degenerate (std=%.3g); skipped", g, std)
            continue
        out += weights[g] * (advantages[g] - advantages[g].mean()) / std
    return out
