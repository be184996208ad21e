"""End-to-end CLI workflow on a miniature configuration."""
import numpy as np
import pytest

from pulselab.analysis import HeatmapTable
from pulselab.cli import cli_dispatch
from pulselab.pulses import Pulse


@pytest.fixture(scope="module")
def tiny_cfg(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "tiny.toml"
    path.write_text("""
[env]
t_max = 1.5

[train]
n_steps = 16
n_envs = 2
max_timesteps = 64
eval_every = 32
eval_episodes = 2
checkpoint_every = 32
batch_size = 32
value_epochs = 2

[sweep]
points = 3
span_pct = 0.02
""")
    return path


@pytest.fixture(scope="module")
def train_dir(tiny_cfg, tmp_path_factory):
    workdir = tmp_path_factory.mktemp("train")
    code = cli_dispatch(["train", "--workdir", str(workdir),
                         "--config", str(tiny_cfg), "--seed", "0"])
    assert code == 0
    return workdir


def test_train_outputs(train_dir):
    ckpts = sorted(train_dir.glob("ckpt_*.pt"))
    assert len(ckpts) >= 2
    metrics = (train_dir / "training_metrics.csv").read_text().splitlines()
    assert metrics[0] == "global_step,mean_reward,mean_JT,mean_C,mean_U"
    assert len(metrics) >= 3


def test_evaluate_command(train_dir, tiny_cfg, tmp_path, capsys):
    ckpt = sorted(train_dir.glob("ckpt_*.pt"))[-1]
    out = tmp_path / "eval.csv"
    code = cli_dispatch(["evaluate", "--checkpoint", str(ckpt),
                         "--episodes", "2", "--out", str(out),
                         "--config", str(tiny_cfg)])
    assert code == 0
    files = sorted(tmp_path.glob("eval_*.csv"))
    assert len(files) == 2
    assert "mean return" in capsys.readouterr().out


def test_sweep_policy_command(train_dir, tiny_cfg, tmp_path):
    ckpt = sorted(train_dir.glob("ckpt_*.pt"))[-1]
    prefix = tmp_path / "ps"
    code = cli_dispatch(["sweep-policy", "--checkpoint", str(ckpt),
                         "--out-prefix", str(prefix),
                         "--config", str(tiny_cfg)])
    assert code == 0
    for name in ("reward", "concurrence_error", "unitarity_error"):
        table = HeatmapTable.from_csv(f"{prefix}_{name}.csv")
        assert table.values.shape == (3, 3)


def test_evolve_heatmaps_command(train_dir, tiny_cfg, tmp_path):
    prefix = tmp_path / "evo"
    code = cli_dispatch(["evolve-heatmaps", "--checkpoint-dir", str(train_dir),
                         "--out-prefix", str(prefix),
                         "--config", str(tiny_cfg)])
    assert code == 0
    spectra = HeatmapTable.from_csv(f"{prefix}_spectra.csv")
    assert spectra.values.shape[0] >= 2
    reward = HeatmapTable.from_csv(f"{prefix}_reward.csv")
    assert reward.values.shape[1] == 10  # 1.5 ns / 0.15 ns segments


def test_noise_command(tmp_path, tiny_cfg, capsys):
    pulse = Pulse(np.full(20, 0.2), 0.05)
    ppath = tmp_path / "p.csv"
    pulse.to_csv(ppath)
    out = tmp_path / "noise.csv"
    code = cli_dispatch(["noise", "--pulse", str(ppath), "--levels", "3",
                         "--out", str(out), "--config", str(tiny_cfg)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "state,levels,t_ns,infidelity"
    assert len(lines) == 1 + 3 * 21
    assert "terminal infidelity" in capsys.readouterr().out


def test_oct_qsl_command(tmp_path, capsys):
    out = tmp_path / "qsl.csv"
    code = cli_dispatch(["oct", "qsl", "--caps", "1.0", "--tmin", "1",
                         "--tmax", "2", "--step", "1", "--restarts", "1",
                         "--out", str(out)])
    assert code == 0
    assert "QSL(cap=1 GHz)" in capsys.readouterr().out
    assert len(out.read_text().splitlines()) == 3
