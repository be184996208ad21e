"""Generalized advantage estimation."""
from __future__ import annotations

import numpy as np


def compute_gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
                bootstrap_values: np.ndarray, gamma: float,
                lam: float) -> tuple[np.ndarray, np.ndarray]:
    """GAE(gamma, lambda) over a (T, n_envs) rollout.

    ``dones[t, e]`` marks a true episode end after step t (terminal or
    truncation): the tail bootstraps with value 0 there. At the rollout
    horizon the value of the next state, ``bootstrap_values``, is used
    for episodes cut mid-flight. Returns (advantages, returns) with
    returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    if rewards.ndim == 1:
        rewards = rewards[:, None]
        values = values[:, None]
        dones = dones[:, None]
    t_len, n_envs = rewards.shape
    bootstrap_values = np.broadcast_to(
        np.asarray(bootstrap_values, dtype=float), (n_envs,))

    advantages = np.zeros_like(rewards)
    gae = np.zeros(n_envs)
    for t in range(t_len - 1, -1, -1):
        next_values = bootstrap_values if t == t_len - 1 else values[t + 1]
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_values * live - values[t]
        gae = delta + gamma * lam * live * gae
        advantages[t] = gae
    returns = advantages + values
    return advantages, returns
