import numpy as np
import pytest
import torch

from pulselab.env import EnvConfig, PulseEnv
from pulselab.trpo import (Checkpoint, PolicyNet, RolloutBatch, TrainConfig,
                           ValueNet, compute_gae, evaluate, load_checkpoint,
                           lr_schedule, policy_update, save_checkpoint, train,
                           value_update)
from pulselab.trpo.nets import flat_params, set_flat_params


def make_policy(seed=0, obs_dim=6, act_dim=2):
    torch.manual_seed(seed)
    return PolicyNet(obs_dim, act_dim, hidden=(16, 16), action_scale=0.2)


def make_batch(policy, n=256, obs_dim=6, act_dim=2, seed=0,
               advantages=None):
    gen = torch.Generator()
    gen.manual_seed(seed)
    obs = torch.randn(n, obs_dim, generator=gen, dtype=torch.float64)
    with torch.no_grad():
        actions, logp = policy.sample(obs, gen)
    if advantages is None:
        advantages = torch.randn(n, generator=gen, dtype=torch.float64)
    returns = torch.randn(n, generator=gen, dtype=torch.float64)
    zeros = torch.zeros(n, dtype=torch.float64)
    return RolloutBatch(observations=obs, actions=actions, log_probs=logp,
                        rewards=zeros, values=zeros, advantages=advantages,
                        returns=returns, dones=zeros)


# ----------------------------------------------------------- lr schedule
def test_lr_schedule_anchors():
    assert lr_schedule(1.0) == 3e-4
    assert lr_schedule(0.0) == pytest.approx(3e-4 / (1 + 10 ** 0.4), abs=1e-9)
    assert lr_schedule(0.0) == pytest.approx(8.542e-5, abs=5e-9)
    assert lr_schedule(0.5) == pytest.approx(3e-4 / (1 + 10 ** 0.4 * 0.5),
                                             abs=1e-12)
    assert lr_schedule(0.5) == pytest.approx(1.3298e-4, abs=5e-8)


def test_lr_schedule_validates():
    with pytest.raises(ValueError):
        lr_schedule(1.5)


# ------------------------------------------------------------------ GAE
def test_gae_single_terminal_step():
    adv, ret = compute_gae(np.array([[1.0]]), np.array([[0.0]]),
                           np.array([[1.0]]), np.array([5.0]), 0.99, 0.95)
    assert adv[0, 0] == pytest.approx(1.0)
    assert ret[0, 0] == pytest.approx(1.0)


def test_gae_lambda_zero_is_td0():
    rng = np.random.default_rng(0)
    r = rng.normal(size=(5, 1))
    v = rng.normal(size=(5, 1))
    boot = np.array([0.7])
    adv, _ = compute_gae(r, v, np.zeros((5, 1)), boot, 0.9, 0.0)
    for t in range(5):
        next_v = boot[0] if t == 4 else v[t + 1, 0]
        assert adv[t, 0] == pytest.approx(r[t, 0] + 0.9 * next_v - v[t, 0])


def test_gae_monte_carlo_hand_case():
    r = np.ones((3, 1))
    v = np.zeros((3, 1))
    dones = np.array([[0.0], [0.0], [1.0]])
    adv, ret = compute_gae(r, v, dones, np.array([9.0]), 1.0, 1.0)
    assert adv[:, 0] == pytest.approx([3.0, 2.0, 1.0])
    assert ret[:, 0] == pytest.approx([3.0, 2.0, 1.0])


def test_gae_resets_across_episode_boundary():
    r = np.array([[1.0], [1.0]])
    v = np.zeros((2, 1))
    dones = np.array([[1.0], [1.0]])
    adv, _ = compute_gae(r, v, dones, np.array([100.0]), 0.99, 0.95)
    assert adv[:, 0] == pytest.approx([1.0, 1.0])


# ------------------------------------------------- gradient correctness
def _fd_check(module, loss_fn, n_coords=10, h=1e-6, seed=3):
    """Central-difference gradient check on random coordinates; the
    error is measured relative to the sampled-gradient norm (per-entry
    relative error is meaningless where the gradient vanishes)."""
    loss = loss_fn()
    grad = torch.autograd.grad(loss, list(module.parameters()))
    flat_grad_vec = torch.cat([g.reshape(-1) for g in grad])
    theta = flat_params(module)
    rng = np.random.default_rng(seed)
    coords = rng.choice(len(theta), size=n_coords, replace=False)
    fd_vals, an_vals = [], []
    for idx in coords:
        shifted = theta.clone()
        shifted[idx] += h
        set_flat_params(module, shifted)
        with torch.no_grad():
            up = float(loss_fn())
        shifted = theta.clone()
        shifted[idx] -= h
        set_flat_params(module, shifted)
        with torch.no_grad():
            dn = float(loss_fn())
        set_flat_params(module, theta)
        fd_vals.append((up - dn) / (2 * h))
        an_vals.append(float(flat_grad_vec[idx]))
    fd_vals = np.array(fd_vals)
    an_vals = np.array(an_vals)
    rel = np.linalg.norm(fd_vals - an_vals) / max(np.linalg.norm(an_vals), 1e-12)
    assert rel <= 1e-5


def test_policy_gradient_matches_fd():
    policy = make_policy(seed=1)
    gen = torch.Generator()
    gen.manual_seed(2)
    obs = torch.randn(32, 6, generator=gen, dtype=torch.float64)
    act = torch.randn(32, 2, generator=gen, dtype=torch.float64) * 0.1

    def loss_fn():
        return policy.log_prob(obs, act).mean()

    _fd_check(policy, loss_fn)


def test_value_gradient_matches_fd():
    torch.manual_seed(4)
    value = ValueNet(6, hidden=(16, 16))
    gen = torch.Generator()
    gen.manual_seed(5)
    obs = torch.randn(32, 6, generator=gen, dtype=torch.float64)
    target = torch.randn(32, generator=gen, dtype=torch.float64)

    def loss_fn():
        return ((value(obs) - target) ** 2).mean()

    _fd_check(value, loss_fn)


# --------------------------------------------------------- policy update
def test_policy_update_zero_advantages_is_noop():
    policy = make_policy(seed=6)
    batch = make_batch(policy, advantages=torch.zeros(256, dtype=torch.float64))
    before = flat_params(policy).clone()
    diag = policy_update(batch, policy, TrainConfig())
    assert not diag["accepted"]
    assert diag["event"] == "zero_gradient"
    assert torch.equal(flat_params(policy), before)


def test_policy_update_respects_kl_and_improves_surrogate():
    config = TrainConfig()
    for seed in range(5):
        policy = make_policy(seed=seed)
        batch = make_batch(policy, seed=seed)
        with torch.no_grad():
            mean_old, std_old = policy(batch.observations)
            logp_old = batch.log_probs.clone()
        diag = policy_update(batch, policy, config)
        assert diag["accepted"]
        assert diag["kl"] <= 0.01 + 1e-4
        assert diag["surrogate_gain"] > 0.0
        # recompute the empirical KL independently
        with torch.no_grad():
            mean_new, std_new = policy(batch.observations)
            kl = PolicyNet.kl(mean_old, std_old, mean_new, std_new)
        assert float(kl) <= 0.0101


def test_policy_update_initial_log_std_zero():
    policy = make_policy(seed=7)
    assert torch.all(policy.log_std == 0.0)


# ---------------------------------------------------------- value update
def test_value_update_zero_gradient_noop():
    torch.manual_seed(8)
    value = ValueNet(6, hidden=(16, 16))
    policy = make_policy(seed=8)
    batch = make_batch(policy, n=64)
    with torch.no_grad():
        batch.returns = value(batch.observations).clone()
    opt = torch.optim.Adam(value.parameters())
    before = flat_params(value).clone()
    value_update(batch, value, opt, lr=1e-3, config=TrainConfig(batch_size=64,
                                                                value_epochs=1))
    assert torch.allclose(flat_params(value), before, atol=1e-12)


def test_value_update_descends():
    torch.manual_seed(9)
    value = ValueNet(6, hidden=(16, 16))
    policy = make_policy(seed=9)
    batch = make_batch(policy, n=256, seed=9)
    opt = torch.optim.SGD(value.parameters(), lr=1e-5)

    def mse():
        with torch.no_grad():
            return float(((value(batch.observations) - batch.returns) ** 2)
                         .mean())

    before = mse()
    gen = torch.Generator()
    gen.manual_seed(10)
    value_update(batch, value, opt, lr=1e-5,
                 config=TrainConfig(value_epochs=1), generator=gen)
    assert mse() <= before


# ------------------------------------------------------------ checkpoint
def test_checkpoint_roundtrip_bitwise(tmp_path):
    env_cfg = EnvConfig(t_max=1.5, seed=0)
    env = PulseEnv(config=env_cfg)
    torch.manual_seed(11)
    policy = PolicyNet(env_cfg.observation_size, env_cfg.k,
                       action_scale=env_cfg.delta_cap)
    value = ValueNet(env_cfg.observation_size)
    opt = torch.optim.Adam(value.parameters())
    config = TrainConfig()
    path = tmp_path / "ck.pt"
    save_checkpoint(path, policy, value, opt, 123, config,
                    env_cfg.observation_size, env_cfg.k)

    logs_before = evaluate(policy, env, episodes=2, deterministic=True, seed=5)
    ck = load_checkpoint(path)
    assert isinstance(ck, Checkpoint)
    assert ck.global_step == 123
    assert ck.config_hash == config.hash()
    restored = ck.make_policy()
    logs_after = evaluate(restored, env, episodes=2, deterministic=True, seed=5)
    for a, b in zip(logs_before, logs_after):
        assert np.array_equal(a.pulse.amplitudes, b.pulse.amplitudes)
        assert np.array_equal(a.rewards, b.rewards)


def test_checkpoint_version_check(tmp_path):
    path = tmp_path / "bad.pt"
    torch.save({"version": 999}, path)
    with pytest.raises(ValueError):
        load_checkpoint(path)


# -------------------------------------------------------------- evaluate
def test_evaluate_untrained_policy_finite():
    env_cfg = EnvConfig(t_max=1.5, seed=0)
    env = PulseEnv(config=env_cfg)
    torch.manual_seed(12)
    policy = PolicyNet(env_cfg.observation_size, env_cfg.k,
                       action_scale=env_cfg.delta_cap)
    logs = evaluate(policy, env, episodes=3, deterministic=True, seed=0)
    assert len(logs) == 3
    for log in logs:
        assert np.all(np.isfinite(log.rewards))


def test_evaluate_stochastic_episodes_distinct():
    env_cfg = EnvConfig(t_max=1.5, seed=0)
    env = PulseEnv(config=env_cfg)
    torch.manual_seed(13)
    policy = PolicyNet(env_cfg.observation_size, env_cfg.k,
                       action_scale=env_cfg.delta_cap)
    logs = evaluate(policy, env, episodes=4, deterministic=False, seed=0)
    pulses = {log.pulse.amplitudes.tobytes() for log in logs if log.pulse}
    assert len(pulses) == 4


# ------------------------------------------------------------ train loop
def tiny_train(tmp_path, seed=0):
    env_cfg = EnvConfig(t_max=1.5, seed=0)

    def factory(i):
        return PulseEnv(config=env_cfg)

    config = TrainConfig(n_steps=16, n_envs=2, max_timesteps=128,
                         eval_every=32, eval_episodes=2, checkpoint_every=64,
                         batch_size=32, value_epochs=2, seed=seed)
    return train(factory, config, tmp_path, log=lambda *a, **k: None)


def test_train_smoke_cadence(tmp_path):
    result = tiny_train(tmp_path / "run")
    assert result.global_step >= 128
    assert len(result.evals) >= 4
    assert len(result.checkpoint_paths) >= 2
    metrics = (tmp_path / "run" / "training_metrics.csv").read_text()
    assert metrics.splitlines()[0] == "global_step,mean_reward,mean_JT,mean_C,mean_U"
    assert len(metrics.splitlines()) >= 5


def test_train_deterministic_across_runs(tmp_path):
    r1 = tiny_train(tmp_path / "a", seed=3)
    r2 = tiny_train(tmp_path / "b", seed=3)
    m1 = (tmp_path / "a" / "training_metrics.csv").read_text()
    m2 = (tmp_path / "b" / "training_metrics.csv").read_text()
    assert m1 == m2
    ck1 = load_checkpoint(r1.final_checkpoint)
    ck2 = load_checkpoint(r2.final_checkpoint)
    for key in ck1.policy_state:
        assert torch.equal(ck1.policy_state[key], ck2.policy_state[key])
