import numpy as np
import pytest

from pulselab.env import (EnvConfig, PulseEnv, encode_component,
                          encode_observation, reward, truncation_check)
from pulselab.system import AMP_CAP_GHZ, SystemParams


@pytest.fixture()
def env():
    return PulseEnv(config=EnvConfig(seed=0))


# ------------------------------------------------------------- encoding
def test_encode_component_values():
    assert encode_component(1.0 + 0j) == (pytest.approx(1.0), pytest.approx(0.0))
    amp, phase = encode_component(-0.5 + 0j)
    assert amp == pytest.approx(0.0)
    assert phase == pytest.approx(1.0)
    assert encode_component(0j) == (pytest.approx(-1.0), pytest.approx(0.0))


def test_encode_observation_layout():
    s010 = np.array([0, 1, 0], dtype=complex)
    s100 = np.array([0, 0, 1], dtype=complex)
    s110 = np.zeros(6, dtype=complex)
    s110[4] = 1.0
    obs = encode_observation(s010, s100, s110, 0.5, np.array([0.1, -0.2, 0.0]))
    assert len(obs) == 28
    # |010> state: component <010| is the second pair
    assert obs[2] == pytest.approx(1.0)
    assert obs[3] == pytest.approx(0.0)
    # zero components encode as (-1, 0)
    assert obs[0] == pytest.approx(-1.0)
    assert obs[24] == pytest.approx(0.5)
    assert np.allclose(obs[25:], [0.1, -0.2, 0.0])


# --------------------------------------------------------------- reward
def test_reward_anchors():
    assert reward(1e-4, np.zeros(3)) == 4.0
    assert reward(1e-3, np.zeros(3)) == 3.0


def test_reward_tv_penalty():
    val = reward(0.25, np.array([0.1, 0.1, 0.1]), alpha_tv=1e-3)
    assert val == pytest.approx(-np.log10(0.25) - 1e-3 * 0.1, abs=1e-15)


def test_reward_signed_variant():
    signed = reward(0.5, np.array([0.1, -0.1, 0.1]), alpha_tv=0.3, signed=True)
    unsigned = reward(0.5, np.array([0.1, -0.1, 0.1]), alpha_tv=0.3)
    assert signed == pytest.approx(-np.log10(0.5) - 0.1 * 0.1)
    assert unsigned == pytest.approx(-np.log10(0.5) - 0.1 * 0.3)


def test_reward_floor_bounds():
    assert reward(0.0, np.zeros(3)) == pytest.approx(12.0)
    assert reward(1.0, np.full(3, 0.2), alpha_tv=1e-3) >= -1e-3 * 0.2


# ----------------------------------------------------------- truncation
def test_truncation_strict_inequality():
    cap = AMP_CAP_GHZ
    assert not truncation_check(np.array([cap]), cap)
    assert truncation_check(np.array([np.nextafter(cap, 10)]), cap)
    assert truncation_check(np.array([np.nan]), cap)
    assert not truncation_check(np.array([0.0]), cap)
    assert truncation_check(np.array([0.0]), cap, propagation_ok=False)


# ------------------------------------------------------------- episodes
def test_reset_observation(env):
    obs = env.reset(seed=0)
    assert len(obs) == 28
    assert obs[2] == pytest.approx(1.0)   # <010| amplitude of |010> state
    assert obs[3] == pytest.approx(0.0)   # and phase
    assert obs[24] == 0.0                  # time
    assert np.all(obs[25:] == 0.0)         # last deltas


def test_reset_deterministic_without_randomization(env):
    a = env.reset(seed=1)
    b = env.reset(seed=2)
    assert np.array_equal(a, b)  # no randomness consumed when pct = 0


def test_randomized_reset_draws_within_bounds():
    cfg = EnvConfig(randomization_pct=0.001, seed=42)
    env = PulseEnv(config=cfg)
    lows, highs = [], []
    for k in range(200):
        env.reset(seed=k)
        lows.append(env.episode_params.omega1)
        highs.append(env.episode_params.omega2)
    lows = np.array(lows)
    assert lows.min() >= 5.8899 * 0.999 - 1e-12
    assert lows.max() <= 5.8899 * 1.001 + 1e-12
    assert lows.std() > 0
    highs = np.array(highs)
    assert highs.min() >= 5.0311 * 0.999 - 1e-12
    assert highs.max() <= 5.0311 * 1.001 + 1e-12


def test_episode_length_334(env):
    env.reset(seed=0)
    steps = 0
    while True:
        result = env.step(np.zeros(3))
        steps += 1
        if result.terminated or result.truncated:
            break
    assert steps == 334
    assert result.terminated and not result.truncated
    assert env.t_ns == pytest.approx(50.1)


def test_zero_action_never_truncates(env):
    env.reset(seed=0)
    for _ in range(334):
        result = env.step(np.zeros(3))
        assert not result.truncated
    assert result.terminated


def test_amplitude_violation_truncates(env):
    env.reset(seed=0)
    cfg = EnvConfig(seed=0, delta_cap=2.0)
    env = PulseEnv(config=cfg)
    env.reset(seed=0)
    for _ in range(10):
        result = env.step(np.full(3, 2.0))  # u ramps 6 GHz per step
        if result.truncated:
            break
    assert result.truncated
    assert not result.terminated
    assert result.reward == -10.0


def test_action_clipping(env):
    env.reset(seed=0)
    result = env.step(np.full(3, 99.0))
    assert not result.truncated  # clipped to 0.2 GHz per substep
    log = env.current_log()
    assert np.allclose(log.pulse.amplitudes, [0.2, 0.4, 0.6])


def test_step_after_terminal_raises(env):
    env.reset(seed=0)
    for _ in range(334):
        env.step(np.zeros(3))
    with pytest.raises(RuntimeError):
        env.step(np.zeros(3))


def test_observation_number_conservation(env):
    rng = np.random.default_rng(0)
    obs = env.reset(seed=0)
    for _ in range(50):
        result = env.step(rng.uniform(-0.05, 0.05, size=3))
        obs = result.observation
        for start, count in ((0, 3), (6, 3), (12, 6)):
            amps = (obs[start:start + 2 * count:2] + 1.0) / 2.0
            assert np.sum(amps ** 2) == pytest.approx(1.0, abs=1e-9)


def test_seed_determinism_bitwise():
    actions = np.random.default_rng(5).uniform(-0.1, 0.1, size=(40, 3))

    def run():
        env = PulseEnv(config=EnvConfig(randomization_pct=0.001))
        env.reset(seed=77)
        rows = []
        for a in actions:
            r = env.step(a)
            rows.append((r.reward, r.observation.tobytes()))
        return rows, env.current_log()

    rows1, log1 = run()
    rows2, log2 = run()
    assert rows1 == rows2
    assert np.array_equal(log1.pulse.amplitudes, log2.pulse.amplitudes)
    assert np.array_equal(log1.rewards, log2.rewards)
    assert log1.omega1 == log2.omega1


def test_replay_reproduces_observations(env):
    rng = np.random.default_rng(9)
    actions = rng.uniform(-0.1, 0.1, size=(60, 3))
    env.reset(seed=3)
    recorded = [env.step(a).observation.copy() for a in actions]
    env.reset(seed=3)
    for a, expect in zip(actions, recorded):
        assert np.array_equal(env.step(a).observation, expect)


def test_info_metrics_present(env):
    env.reset(seed=0)
    result = env.step(np.zeros(3))
    assert set(result.info) == {"J_T", "C", "U", "t"}
    assert 0.0 <= result.info["J_T"] <= 1.0
    assert result.info["t"] == pytest.approx(0.15)


def test_episode_log_csv_roundtrip(tmp_path, env):
    env.reset(seed=0)
    for _ in range(5):
        env.step(np.full(3, 0.01))
    log = env.current_log()
    path = tmp_path / "episode.csv"
    log.to_csv(path)
    text = path.read_text().splitlines()
    assert text[0] == "step,t_ns,u_ghz,reward,C,U,J_T"
    assert len(text) == 1 + 15  # 5 segments x K=3 substeps
    meta = (tmp_path / "episode.csv.json").read_text()
    assert '"omega1"' in meta


def test_observation_size_general():
    assert EnvConfig(k=5).observation_size == 30
    assert EnvConfig().observation_size == 28
