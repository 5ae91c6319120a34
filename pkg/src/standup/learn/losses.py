"""PPO losses with analytic gradients.

Every function returns (loss value, gradient list aligned with the net's
``param_arrays()``).  The trainer sums gradient lists before the Adam step.
"""

from __future__ import annotations

import numpy as np

from .mlp import MLP
from .policy import GaussianPolicy


def _add(acc: list[np.ndarray], grads: list[np.ndarray]) -> None:
    for a, g in zip(acc, grads):
        a += g


def ppo_policy_loss(policy: GaussianPolicy, obs: np.ndarray, actions: np.ndarray,
                    logp_old: np.ndarray, advantages: np.ndarray,
                    clip_ratio: float, entropy_coef: float):
    """Clipped-surrogate policy loss with an entropy bonus (minimized).

    Samples whose ratio is clipped contribute zero gradient; the entropy
    term only reaches the log-std (state-independent Gaussian).
    Returns (loss, grads, stats).
    """
    B = obs.shape[0]
    mean, cache = policy.mlp.forward(obs)
    logp_new = policy.log_prob(mean, actions)
    ratio = np.exp(logp_new - logp_old)
    clipped = np.clip(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio)
    surr = np.minimum(ratio * advantages, clipped * advantages)
    entropy = policy.entropy()
    loss = -float(surr.mean()) - entropy_coef * entropy

    # gradient flows only where the unclipped branch attains the minimum
    active = (ratio * advantages) <= (clipped * advantages)
    dlogp = -(advantages * ratio * active) / B
    d_mean_per, d_logstd_per = policy.log_prob_grads(mean, actions)
    g_mean = dlogp[:, None] * d_mean_per
    g_logstd = (dlogp[:, None] * d_logstd_per).sum(axis=0) - entropy_coef
    mlp_grads, _ = policy.mlp.backward(cache, g_mean)
    grads = mlp_grads + [g_logstd]

    stats = {
        "approx_kl": float(np.mean(logp_old - logp_new)),
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > clip_ratio)),
        "entropy": entropy,
    }
    return loss, grads, stats


def critic_loss(critic: MLP, obs: np.ndarray, targets: np.ndarray,
                coef: float = 1.0, *, mode: str = "gae",
                target_critic: MLP | None = None, rewards: np.ndarray | None = None,
                obs_next: np.ndarray | None = None, dones: np.ndarray | None = None,
                gamma: float = 0.99):
    """Value-regression loss for one reward group's critic (minimized).

    mode "gae": plain MSE against precomputed GAE value targets.
    mode "td0": MSE against r + gamma * target_critic(s') on non-terminal
    steps (the conventional one-step bootstrap).
    mode "literal": the printed-form variant ||r + gamma*V(s) - Vbar(s')||^2,
    kept behind this flag because it transposes the usual time indices; its
    gradient reaches V(s) through the gamma factor.
    Returns (loss, grads).
    """
    v, cache = critic.forward(obs)
    v = v[:, 0]
    B = obs.shape[0]
    if mode == "gae":
        resid = v - targets
        loss = coef * float(np.mean(resid**2))
        gv = coef * 2.0 * resid[:, None] / B
    elif mode == "td0":
        if target_critic is None or rewards is None or obs_next is None or dones is None:
            raise ValueError("td0 mode needs rewards, next observations, dones")
        v_next = target_critic(obs_next)[:, 0]
        target = rewards + gamma * v_next * ~dones
        resid = v - target
        loss = coef * float(np.mean(resid**2))
        gv = coef * 2.0 * resid[:, None] / B
    elif mode == "literal":
        if target_critic is None or rewards is None or obs_next is None:
            raise ValueError("literal mode needs rewards and next observations")
        vbar_next = target_critic(obs_next)[:, 0]
        resid = rewards + gamma * v - vbar_next
        loss = coef * float(np.mean(resid**2))
        gv = coef * 2.0 * gamma * resid[:, None] / B
    else:
        raise ValueError(f"unknown critic loss mode {mode!r}")
    grads, _ = critic.backward(cache, gv)
    return loss, grads


def combined_minibatch_update(policy: GaussianPolicy, critics: list[MLP],
                              target_critics: list[MLP], obs: np.ndarray,
                              actions: np.ndarray, logp_old: np.ndarray,
                              advantages: np.ndarray, targets: np.ndarray,
                              obs_next: np.ndarray, rewards: np.ndarray,
                              dones: np.ndarray, u: np.ndarray, cfg) -> tuple:
    """Fused policy + critic + smoothness update for one minibatch.

    Computes the same gradients as composing ppo_policy_loss, critic_loss
    and l2c2_loss (asserted by tests) but shares forward passes: policy and
    each critic run once on [obs; obs_bar] stacked along the batch axis.
    Returns (grads, policy_loss, value_losses, l2c2_value, stats).
    """
    B = obs.shape[0]
    use_l2c2 = cfg.l2c2
    if use_l2c2:
        blend = u * (~dones[:, None])
        obs_bar = obs + blend * (obs_next - obs)
        x = np.concatenate([obs, obs_bar], axis=0)
    else:
        x = obs

    mean_all, cache = policy.mlp.forward(x)
    mean = mean_all[:B]
    logp_new = policy.log_prob(mean, actions)
    ratio = np.exp(logp_new - logp_old)
    clipped = np.clip(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio)
    surr = np.minimum(ratio * advantages, clipped * advantages)
    entropy = policy.entropy()
    policy_loss = -float(surr.mean()) - cfg.entropy_coef * entropy
    active = (ratio * advantages) <= (clipped * advantages)
    dlogp = -(advantages * ratio * active) / B
    d_mean_per, d_logstd_per = policy.log_prob_grads(mean, actions)
    g_mean = dlogp[:, None] * d_mean_per
    g_logstd = (dlogp[:, None] * d_logstd_per).sum(axis=0) - cfg.entropy_coef

    l2c2_value = 0.0
    if use_l2c2:
        diff = mean - mean_all[B:]
        l2c2_value += cfg.l2c2_policy_weight * float(np.sum(diff**2) / B)
        g_pi = 2.0 * cfg.l2c2_policy_weight * diff / B
        gy = np.concatenate([g_mean + g_pi, -g_pi], axis=0)
    else:
        gy = g_mean
    pol_grads, _ = policy.mlp.backward(cache, gy)
    grads = pol_grads + [g_logstd]

    value_losses = []
    for g, critic in enumerate(critics):
        v_all, ccache = critic.forward(x)
        v = v_all[:B, 0]
        if cfg.critic_target_mode == "gae":
            resid = v - targets[g]
        elif cfg.critic_target_mode == "td0":
            v_next = target_critics[g](obs_next)[:, 0]
            resid = v - (rewards[:, g] + cfg.gamma * v_next * ~dones)
        else:  # literal printed form
            vbar_next = target_critics[g](obs_next)[:, 0]
            resid = rewards[:, g] + cfg.gamma * v - vbar_next
        closs = cfg.value_coef * float(np.mean(resid**2))
        scale = cfg.gamma if cfg.critic_target_mode == "literal" else 1.0
        gv = cfg.value_coef * 2.0 * scale * resid[:, None] / B
        if use_l2c2:
            dv = v_all[:B] - v_all[B:]
            l2c2_value += cfg.l2c2_value_weight * float(np.sum(dv**2) / B)
            gvc = 2.0 * cfg.l2c2_value_weight * dv / B
            gy_c = np.concatenate([gv + gvc, -gvc], axis=0)
        else:
            gy_c = gv
        cgrads, _ = critic.backward(ccache, gy_c)
        grads += cgrads
        value_losses.append(closs)

    stats = {
        "approx_kl": float(np.mean(logp_old - logp_new)),
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > cfg.clip_ratio)),
        "entropy": entropy,
    }
    return grads, policy_loss, value_losses, l2c2_value, stats


def l2c2_loss(policy: GaussianPolicy, critics: list[MLP], obs: np.ndarray,
              obs_next: np.ndarray, dones: np.ndarray, u: np.ndarray,
              lambda_pi: float, lambda_v: float):
    """Smoothness regularization over interpolated states (minimized).

    For each sample the state is blended toward its successor by a uniform
    draw u in [0, 1); the loss is the squared distance between the policy
    means (weight lambda_pi) and each critic's values (weight lambda_v) at
    the original and blended states.  Terminal samples interpolate to
    themselves, contributing zero.  Returns (loss, policy grads, per-critic
    grads).
    """
    B = obs.shape[0]
    blend = u * (~dones[:, None])
    obs_bar = obs + blend * (obs_next - obs)

    mean, cache = policy.mlp.forward(obs)
    mean_bar, cache_bar = policy.mlp.forward(obs_bar)
    diff = mean - mean_bar
    loss = lambda_pi * float(np.sum(diff**2) / B)
    g = 2.0 * lambda_pi * diff / B
    grads_a, _ = policy.mlp.backward(cache, g)
    grads_b, _ = policy.mlp.backward(cache_bar, -g)
    _add(grads_a, grads_b)
    policy_grads = grads_a + [np.zeros_like(policy.log_std)]

    critic_grads = []
    for critic in critics:
        v, c1 = critic.forward(obs)
        v_bar, c2 = critic.forward(obs_bar)
        dv = v - v_bar
        loss += lambda_v * float(np.sum(dv**2) / B)
        gv = 2.0 * lambda_v * dv / B
        ga, _ = critic.backward(c1, gv)
        gb, _ = critic.backward(c2, -gv)
        _add(ga, gb)
        critic_grads.append(ga)
    return loss, policy_grads, critic_grads
