"""TOML configuration: [system], [env], [train], [oct], [sweep] tables."""
from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .env import EnvConfig
from .system import AMP_CAP_GHZ, SystemParams
from .trpo.core import TrainConfig


@dataclass(frozen=True)
class OctSettings:
    guess: str = "flat_top"
    duration: float = 50.0          # ns
    dt: float = 0.05                # ns
    amplitude: float = 0.5          # GHz
    rise: float = 2.0               # ns
    frequency: float = 0.8588       # GHz
    cap: float = AMP_CAP_GHZ        # GHz
    max_iters: int = 200
    method: str = "lbfgs"
    scheme: str = "jt_finite_difference"
    threshold: float = 1e-4
    restarts: int = 3


@dataclass(frozen=True)
class SweepSettings:
    span_pct: float = 1.0           # +- percentage of nominal frequency
    points: int = 11                # grid points per axis
    terminal_window_ns: float = 5.0
    minfilter_ns: float = 1.05
    cutoff_ghz: float = 3.0         # spectral-filter default


@dataclass(frozen=True)
class AppConfig:
    system: SystemParams = field(default_factory=SystemParams)
    env: EnvConfig = field(default_factory=EnvConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    oct: OctSettings = field(default_factory=OctSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)


_TABLES = {
    "system": SystemParams,
    "env": EnvConfig,
    "train": TrainConfig,
    "oct": OctSettings,
    "sweep": SweepSettings,
}


def _build(cls, table: dict, name: str):
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(table) - set(known))
    if unknown:
        raise ValueError(f"unknown keys in [{name}]: {', '.join(unknown)}")
    coerced = {}
    for key, val in table.items():
        if key == "hidden":
            val = tuple(val)
        coerced[key] = val
    return cls(**coerced)


def load_config(path: str | Path | None = None) -> AppConfig:
    """Defaults when path is None; unknown tables or keys are errors."""
    if path is None:
        return AppConfig()
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    unknown = sorted(set(data) - set(_TABLES))
    if unknown:
        raise ValueError(f"unknown config tables: {', '.join(unknown)}")
    parts = {name: _build(cls, data.get(name, {}), name)
             for name, cls in _TABLES.items()}
    return AppConfig(**parts)
