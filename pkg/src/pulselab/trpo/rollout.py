"""Rollout storage for TRPO updates."""
from __future__ import annotations

from dataclasses import dataclass

import torch


@dataclass
class RolloutBatch:
    """Flattened (n_steps * n_envs) experience for one update.

    Advantages are normalized to zero mean / unit variance inside
    ``policy_update`` before the natural-gradient step.
    """

    observations: torch.Tensor   # (N, obs_dim)
    actions: torch.Tensor        # (N, act_dim)
    log_probs: torch.Tensor      # (N,)
    rewards: torch.Tensor        # (N,)
    values: torch.Tensor         # (N,)
    advantages: torch.Tensor     # (N,)
    returns: torch.Tensor        # (N,)
    dones: torch.Tensor          # (N,) episode boundaries

    def __len__(self) -> int:
        return self.observations.shape[0]
