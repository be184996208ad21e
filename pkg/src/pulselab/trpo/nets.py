"""Gaussian MLP policy and value networks (float64, CPU)."""
from __future__ import annotations

import math

import torch
import torch.nn as nn

LOG_2PI = math.log(2.0 * math.pi)


def _mlp(sizes: tuple[int, ...], out_gain: float) -> nn.Sequential:
    layers: list[nn.Module] = []
    for i in range(len(sizes) - 1):
        lin = nn.Linear(sizes[i], sizes[i + 1], dtype=torch.float64)
        last = i == len(sizes) - 2
        nn.init.orthogonal_(lin.weight, gain=out_gain if last else math.sqrt(2.0))
        nn.init.zeros_(lin.bias)
        layers.append(lin)
        if not last:
            layers.append(nn.Tanh())
    return nn.Sequential(*layers)


class PolicyNet(nn.Module):
    """Diagonal Gaussian policy with a tanh-bounded mean scaled to
    +-action_scale.

    The state-independent log-std (initialized to zero) lives in
    normalized action units, so the physical standard deviation is
    action_scale * exp(log_std): exploration starts at the scale of the
    per-substep delta cap rather than at 1 GHz.
    """

    def __init__(self, obs_dim: int, act_dim: int, hidden: tuple[int, int] = (128, 128),
                 action_scale: float = 0.2):
        super().__init__()
        self.body = _mlp((obs_dim, *hidden, act_dim), out_gain=0.01)
        self.log_std = nn.Parameter(torch.zeros(act_dim, dtype=torch.float64))
        self.action_scale = float(action_scale)

    def mean(self, obs: torch.Tensor) -> torch.Tensor:
        return self.action_scale * torch.tanh(self.body(obs))

    def forward(self, obs: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        mean = self.mean(obs)
        std = (self.action_scale * torch.exp(self.log_std)).expand_as(mean)
        return mean, std

    def sample(self, obs: torch.Tensor,
               generator: torch.Generator | None = None) -> tuple[torch.Tensor, torch.Tensor]:
        mean, std = self(obs)
        noise = torch.randn(mean.shape, generator=generator, dtype=torch.float64)
        action = mean + std * noise
        return action, self.log_prob(obs, action)

    def log_prob(self, obs: torch.Tensor, action: torch.Tensor) -> torch.Tensor:
        mean, std = self(obs)
        var = std ** 2
        return (-0.5 * (((action - mean) ** 2) / var + 2 * torch.log(std) + LOG_2PI)
                ).sum(dim=-1)

    @staticmethod
    def kl(mean_old: torch.Tensor, std_old: torch.Tensor,
           mean_new: torch.Tensor, std_new: torch.Tensor) -> torch.Tensor:
        """Mean KL(old || new) over a batch of diagonal Gaussians."""
        per_dim = (torch.log(std_new / std_old)
                   + (std_old ** 2 + (mean_old - mean_new) ** 2) / (2 * std_new ** 2)
                   - 0.5)
        return per_dim.sum(dim=-1).mean()


class ValueNet(nn.Module):
    def __init__(self, obs_dim: int, hidden: tuple[int, int] = (128, 128)):
        super().__init__()
        self.body = _mlp((obs_dim, *hidden, 1), out_gain=1.0)

    def forward(self, obs: torch.Tensor) -> torch.Tensor:
        return self.body(obs).squeeze(-1)


def flat_params(module: nn.Module) -> torch.Tensor:
    return torch.cat([p.detach().reshape(-1) for p in module.parameters()])


def set_flat_params(module: nn.Module, flat: torch.Tensor) -> None:
    offset = 0
    for p in module.parameters():
        n = p.numel()
        p.data.copy_(flat[offset:offset + n].view_as(p))
        offset += n


def flat_grad(output: torch.Tensor, module: nn.Module,
              create_graph: bool = False,
              retain_graph: bool | None = None) -> torch.Tensor:
    grads = torch.autograd.grad(output, list(module.parameters()),
                                create_graph=create_graph,
                                retain_graph=retain_graph,
                                allow_unused=True)
    out = []
    for g, p in zip(grads, module.parameters()):
        out.append((torch.zeros_like(p) if g is None else g).reshape(-1))
    return torch.cat(out)
