"""Trust-region policy optimization built from scratch.

Natural-gradient steps from conjugate gradient on the Fisher system
(Fisher-vector products via double backprop through the Gaussian KL),
scaled to the KL trust-region boundary, accepted by a backtracking line
search requiring positive surrogate improvement and KL within the
target. The value network is fit to GAE returns with Adam driven by the
inverse-decay learning-rate schedule.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..env import EpisodeLog
from .gae import compute_gae
from .nets import PolicyNet, ValueNet, flat_grad, flat_params, set_flat_params
from .rollout import RolloutBatch

CHECKPOINT_FORMAT_VERSION = 1


class TrainingDiverged(Exception):
    """Persistent non-finite losses/gradients during training."""


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    target_kl: float = 0.01
    batch_size: int = 128
    n_steps: int = 2048
    n_envs: int = 4
    max_timesteps: int = 20_000_000
    lr0: float = 3e-4
    cg_iters: int = 10
    cg_damping: float = 0.1
    backtrack_factor: float = 0.8
    max_backtracks: int = 10
    value_epochs: int = 10
    eval_every: int = 2048
    eval_episodes: int = 10
    checkpoint_every: int = 4096
    plateau_window: int = 50
    plateau_min_improvement: float = 0.01
    hidden: tuple[int, int] = (128, 128)
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.gamma <= 1):
            raise ValueError("gamma must be in (0, 1]")
        if not (0 <= self.gae_lambda <= 1):
            raise ValueError("gae_lambda must be in [0, 1]")
        if self.target_kl <= 0:
            raise ValueError("target_kl must be positive")

    def hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def lr_schedule(remaining_fraction: float, lr0: float = 3e-4) -> float:
    """lr = lr0 / (1 + 10^0.4 * x) with x the fraction of training done.

    Larger updates early in training, smooth annealing toward the end.
    """
    if not (0.0 <= remaining_fraction <= 1.0):
        raise ValueError("remaining_fraction must lie in [0, 1]")
    x = 1.0 - remaining_fraction
    return lr0 / (1.0 + (10.0 ** 0.4) * x)


def conjugate_gradient(matvec, b: torch.Tensor, iters: int,
                       tol: float = 1e-10) -> torch.Tensor:
    x = torch.zeros_like(b)
    r = b.clone()
    p = b.clone()
    rs = torch.dot(r, r)
    for _ in range(iters):
        ap = matvec(p)
        alpha = rs / torch.dot(p, ap)
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = torch.dot(r, r)
        if rs_new < tol:
            break
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x


def policy_update(batch: RolloutBatch, policy: PolicyNet,
                  config: TrainConfig) -> dict:
    """One KL-constrained natural-gradient step; returns diagnostics.

    The policy is left unchanged when no backtracked step satisfies both
    the KL constraint and strict surrogate improvement, or when the
    gradient is non-finite.
    """
    obs, act = batch.observations, batch.actions
    adv = batch.advantages
    std_adv = adv.std()
    adv = (adv - adv.mean()) / (std_adv + 1e-8)
    logp_old = batch.log_probs.detach()

    with torch.no_grad():
        mean_old, std_old = policy(obs)

    def surrogate() -> torch.Tensor:
        logp = policy.log_prob(obs, act)
        return (torch.exp(logp - logp_old) * adv).mean()

    sur_0 = surrogate()
    g = flat_grad(sur_0, policy)
    sur_0_val = float(sur_0.detach())
    diag = {"accepted": False, "kl": 0.0, "surrogate_gain": 0.0,
            "grad_norm": float(g.norm()), "backtracks": 0, "event": ""}
    if not torch.isfinite(g).all():
        diag["event"] = "nonfinite_gradient"
        return diag
    if g.norm() < 1e-12:
        diag["event"] = "zero_gradient"
        return diag

    def fisher_vec(v: torch.Tensor) -> torch.Tensor:
        mean_new, std_new = policy(obs)
        kl = PolicyNet.kl(mean_old, std_old, mean_new, std_new)
        kl_grad = flat_grad(kl, policy, create_graph=True)
        gv = torch.dot(kl_grad, v)
        hv = flat_grad(gv, policy)
        return hv + config.cg_damping * v

    direction = conjugate_gradient(fisher_vec, g, config.cg_iters)
    dfd = torch.dot(direction, fisher_vec(direction))
    if dfd <= 0 or not torch.isfinite(dfd):
        diag["event"] = "bad_curvature"
        return diag
    full_step = torch.sqrt(2.0 * config.target_kl / dfd) * direction

    theta_old = flat_params(policy)
    scale = 1.0
    for bt in range(config.max_backtracks):
        set_flat_params(policy, theta_old + scale * full_step)
        with torch.no_grad():
            sur_new = surrogate()
            mean_new, std_new = policy(obs)
            kl_new = PolicyNet.kl(mean_old, std_old, mean_new, std_new)
        if torch.isfinite(sur_new) and torch.isfinite(kl_new) \
                and float(kl_new) <= config.target_kl \
                and float(sur_new) > sur_0_val:
            diag.update(accepted=True, kl=float(kl_new),
                        surrogate_gain=float(sur_new) - sur_0_val,
                        backtracks=bt)
            return diag
        scale *= config.backtrack_factor
    set_flat_params(policy, theta_old)
    diag["event"] = "line_search_failed"
    return diag


def value_update(batch: RolloutBatch, value: ValueNet,
                 optimizer: torch.optim.Optimizer, lr: float,
                 config: TrainConfig,
                 generator: torch.Generator | None = None) -> float:
    """Minibatch regression of V(s) onto the GAE returns; returns the
    final epoch's mean loss."""
    for group in optimizer.param_groups:
        group["lr"] = lr
    n = len(batch)
    last_loss = 0.0
    for _ in range(config.value_epochs):
        perm = torch.randperm(n, generator=generator)
        losses = []
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            pred = value(batch.observations[idx])
            loss = ((pred - batch.returns[idx]) ** 2).mean()
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
        last_loss = float(np.mean(losses))
    return last_loss


# ------------------------------------------------------------ checkpoints
@dataclass
class Checkpoint:
    version: int
    global_step: int
    obs_dim: int
    act_dim: int
    action_scale: float
    hidden: tuple[int, int]
    policy_state: dict
    value_state: dict
    value_opt_state: dict
    config: dict
    config_hash: str
    torch_rng: torch.Tensor
    numpy_rng: str

    def make_policy(self) -> PolicyNet:
        policy = PolicyNet(self.obs_dim, self.act_dim, tuple(self.hidden),
                           self.action_scale)
        policy.load_state_dict(self.policy_state)
        return policy

    def make_value(self) -> ValueNet:
        value = ValueNet(self.obs_dim, tuple(self.hidden))
        value.load_state_dict(self.value_state)
        return value


def save_checkpoint(path: str | Path, policy: PolicyNet, value: ValueNet,
                    value_opt: torch.optim.Optimizer, global_step: int,
                    config: TrainConfig, obs_dim: int, act_dim: int,
                    numpy_rng_state: dict | None = None) -> None:
    payload = {
        "version": CHECKPOINT_FORMAT_VERSION,
        "global_step": int(global_step),
        "obs_dim": int(obs_dim),
        "act_dim": int(act_dim),
        "action_scale": float(policy.action_scale),
        "hidden": list(config.hidden),
        "policy_state": policy.state_dict(),
        "value_state": value.state_dict(),
        "value_opt_state": value_opt.state_dict(),
        "config": asdict(config),
        "config_hash": config.hash(),
        "torch_rng": torch.get_rng_state(),
        "numpy_rng": json.dumps(numpy_rng_state or {}, default=str),
    }
    torch.save(payload, str(path))


def load_checkpoint(path: str | Path) -> Checkpoint:
    payload = torch.load(str(path), weights_only=False)
    if payload.get("version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version "
                         f"{payload.get('version')!r}")
    payload["hidden"] = tuple(payload["hidden"])
    payload["config"] = dict(payload["config"])
    return Checkpoint(**payload)


# -------------------------------------------------------------- evaluate
def evaluate(policy: PolicyNet, env, episodes: int, deterministic: bool = True,
             seed: int = 0) -> list[EpisodeLog]:
    """Roll out episodes; deterministic mode follows the policy mean."""
    logs = []
    gen = None
    if not deterministic:
        gen = torch.Generator()
        gen.manual_seed(seed)
    for ep in range(episodes):
        obs = env.reset(seed=seed + ep)
        done = False
        while not done:
            obs_t = torch.as_tensor(obs, dtype=torch.float64)[None]
            with torch.no_grad():
                if deterministic:
                    action = policy.mean(obs_t)[0].numpy()
                else:
                    action = policy.sample(obs_t, gen)[0][0].numpy()
            result = env.step(action)
            obs = result.observation
            done = result.terminated or result.truncated
        logs.append(env.current_log())
    return logs


def eval_summary(logs: list[EpisodeLog]) -> dict:
    """Mean episode return plus mean terminal metrics over a batch of logs."""
    returns = [log.episode_return for log in logs]
    finals = [(log.cost[-1], log.concurrence[-1], log.unitarity[-1])
              for log in logs if len(log.cost)]
    jt, c, u = (np.mean([f[i] for f in finals]) if finals else np.nan
                for i in range(3))
    return {"mean_reward": float(np.mean(returns)), "mean_JT": float(jt),
            "mean_C": float(c), "mean_U": float(u)}


# ----------------------------------------------------------------- train
@dataclass
class TrainResult:
    global_step: int
    checkpoint_paths: list[str]
    metrics_path: str
    evals: list[dict]
    stopped_early: bool
    final_checkpoint: str
    update_diagnostics: list[dict] = field(default_factory=list)


def train(env_factory, config: TrainConfig, workdir: str | Path,
          log=print) -> TrainResult:
    """Collect vectorized rollouts, update policy and value nets, and
    periodically evaluate (deterministic) and checkpoint.

    ``env_factory(i)`` must build an independent environment instance;
    the training loop seeds environment i with ``config.seed + 1000*(i+1)``
    and the evaluation environment with a separate stream.
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(config.seed)
    action_gen = torch.Generator()
    action_gen.manual_seed(config.seed + 1)
    value_gen = torch.Generator()
    value_gen.manual_seed(config.seed + 2)

    envs = [env_factory(i) for i in range(config.n_envs)]
    eval_env = env_factory(config.n_envs)
    obs_dim = envs[0].config.observation_size
    act_dim = envs[0].config.k
    action_scale = envs[0].config.delta_cap

    policy = PolicyNet(obs_dim, act_dim, config.hidden, action_scale)
    value = ValueNet(obs_dim, config.hidden)
    value_opt = torch.optim.Adam(value.parameters(), lr=config.lr0)

    obs = np.stack([env.reset(seed=config.seed + 1000 * (i + 1))
                    for i, env in enumerate(envs)])

    metrics_path = workdir / "training_metrics.csv"
    with open(metrics_path, "w", newline="") as fh:
        csv.writer(fh).writerow(
            ["global_step", "mean_reward", "mean_JT", "mean_C", "mean_U"])

    global_step = 0
    next_eval = config.eval_every
    next_ckpt = config.checkpoint_every
    eval_records: list[dict] = []
    ckpt_paths: list[str] = []
    diagnostics: list[dict] = []
    best_eval = -np.inf
    evals_since_improvement = 0
    stopped_early = False
    nonfinite_streak = 0

    def run_eval():
        nonlocal best_eval, evals_since_improvement
        logs = evaluate(policy, eval_env, config.eval_episodes,
                        deterministic=True, seed=config.seed + 500_000)
        summary = eval_summary(logs)
        summary["global_step"] = global_step
        eval_records.append(summary)
        with open(metrics_path, "a", newline="") as fh:
            csv.writer(fh).writerow(
                [global_step, repr(summary["mean_reward"]),
                 repr(summary["mean_JT"]), repr(summary["mean_C"]),
                 repr(summary["mean_U"])])
        if summary["mean_reward"] > best_eval + config.plateau_min_improvement:
            best_eval = max(best_eval, summary["mean_reward"])
            evals_since_improvement = 0
        else:
            evals_since_improvement += 1
        log(f"[eval] step={global_step} mean_reward={summary['mean_reward']:.3f} "
            f"mean_JT={summary['mean_JT']:.3e}")

    def run_ckpt():
        path = workdir / f"ckpt_{global_step:010d}.pt"
        save_checkpoint(path, policy, value, value_opt, global_step, config,
                        obs_dim, act_dim)
        ckpt_paths.append(str(path))

    while global_step < config.max_timesteps and not stopped_early:
        t_len = config.n_steps
        buf_obs = np.zeros((t_len, config.n_envs, obs_dim))
        buf_act = np.zeros((t_len, config.n_envs, act_dim))
        buf_logp = np.zeros((t_len, config.n_envs))
        buf_rew = np.zeros((t_len, config.n_envs))
        buf_val = np.zeros((t_len, config.n_envs))
        buf_done = np.zeros((t_len, config.n_envs))

        for t in range(t_len):
            obs_t = torch.as_tensor(obs, dtype=torch.float64)
            with torch.no_grad():
                actions, logp = policy.sample(obs_t, action_gen)
                vals = value(obs_t)
            buf_obs[t] = obs
            buf_act[t] = actions.numpy()
            buf_logp[t] = logp.numpy()
            buf_val[t] = vals.numpy()
            for i, env in enumerate(envs):
                result = env.step(buf_act[t, i])
                buf_rew[t, i] = result.reward
                done = result.terminated or result.truncated
                buf_done[t, i] = float(done)
                obs[i] = env.reset() if done else result.observation
            global_step += config.n_envs
            while global_step >= next_eval:
                run_eval()
                next_eval += config.eval_every
                if evals_since_improvement >= config.plateau_window:
                    stopped_early = True
            while global_step >= next_ckpt:
                run_ckpt()
                next_ckpt += config.checkpoint_every
            if stopped_early or global_step >= config.max_timesteps:
                buf_obs = buf_obs[:t + 1]
                buf_act = buf_act[:t + 1]
                buf_logp = buf_logp[:t + 1]
                buf_rew = buf_rew[:t + 1]
                buf_val = buf_val[:t + 1]
                buf_done = buf_done[:t + 1]
                break

        with torch.no_grad():
            bootstrap = value(torch.as_tensor(obs, dtype=torch.float64)).numpy()
        adv, ret = compute_gae(buf_rew, buf_val, buf_done, bootstrap,
                               config.gamma, config.gae_lambda)

        def flat(a):
            return torch.as_tensor(a.reshape(-1, *a.shape[2:]),
                                   dtype=torch.float64)

        batch = RolloutBatch(
            observations=flat(buf_obs), actions=flat(buf_act),
            log_probs=flat(buf_logp), rewards=flat(buf_rew),
            values=flat(buf_val), advantages=flat(adv),
            returns=flat(ret), dones=flat(buf_done))

        diag = policy_update(batch, policy, config)
        diagnostics.append(diag)
        if diag["event"] == "nonfinite_gradient":
            nonfinite_streak += 1
            log(f"[warn] non-finite policy gradient at step {global_step}; "
                "update skipped")
            if nonfinite_streak >= 5:
                dump = workdir / "divergence_dump.json"
                dump.write_text(json.dumps(diagnostics[-10:], indent=2))
                raise TrainingDiverged(f"persistent non-finite gradients; "
                                       f"diagnostics in {dump}")
        else:
            nonfinite_streak = 0

        remaining = max(0.0, 1.0 - global_step / config.max_timesteps)
        vloss = value_update(batch, value, value_opt,
                             lr_schedule(remaining, config.lr0), config,
                             value_gen)
        log(f"[train] step={global_step} accepted={diag['accepted']} "
            f"kl={diag['kl']:.2e} sur_gain={diag['surrogate_gain']:.2e} "
            f"vloss={vloss:.3f}")

    final_path = workdir / f"ckpt_{global_step:010d}.pt"
    if not ckpt_paths or ckpt_paths[-1] != str(final_path):
        save_checkpoint(final_path, policy, value, value_opt, global_step,
                        config, obs_dim, act_dim)
        ckpt_paths.append(str(final_path))
    return TrainResult(global_step=global_step, checkpoint_paths=ckpt_paths,
                       metrics_path=str(metrics_path), evals=eval_records,
                       stopped_early=stopped_early,
                       final_checkpoint=ckpt_paths[-1],
                       update_diagnostics=diagnostics)
