"""Piecewise-constant control pulses and their CSV serialization."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_DT_NS = 0.05


@dataclass(frozen=True)
class Pulse:
    """Piecewise-constant control amplitudes, u/2pi in GHz, step dt in ns."""

    amplitudes: np.ndarray
    dt: float = DEFAULT_DT_NS

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=float)
        object.__setattr__(self, "amplitudes", amps)
        if amps.ndim != 1 or len(amps) == 0:
            raise ValueError("amplitudes must be a non-empty 1-D array")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError("dt must be positive and finite")

    def __len__(self) -> int:
        return len(self.amplitudes)

    @property
    def duration(self) -> float:
        return len(self.amplitudes) * self.dt

    @property
    def times(self) -> np.ndarray:
        """Midpoint time of each step, in ns."""
        return (np.arange(len(self.amplitudes)) + 0.5) * self.dt

    def check_cap(self, cap: float) -> None:
        worst = np.abs(self.amplitudes).max()
        if worst > cap:
            raise ValueError(f"amplitude {worst:.6f} GHz exceeds cap {cap:.6f} GHz")

    def clipped(self, cap: float) -> "Pulse":
        return Pulse(np.clip(self.amplitudes, -cap, cap), self.dt)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            write_pulse_csv(fh, self)

    @classmethod
    def from_csv(cls, path: str | Path) -> "Pulse":
        with open(path, newline="") as fh:
            return read_pulse_csv(fh)


def write_pulse_csv(fh, pulse: Pulse) -> None:
    w = csv.writer(fh)
    w.writerow(["t_ns", "u_ghz"])
    for t, u in zip(pulse.times, pulse.amplitudes):
        w.writerow([repr(float(t)), repr(float(u))])


def read_pulse_csv(fh) -> Pulse:
    rows = list(csv.reader(fh))
    if not rows or rows[0] != ["t_ns", "u_ghz"]:
        raise ValueError("pulse CSV must start with header 't_ns,u_ghz'")
    t = np.array([float(r[0]) for r in rows[1:]])
    u = np.array([float(r[1]) for r in rows[1:]])
    if len(t) < 1:
        raise ValueError("pulse CSV has no samples")
    # times are step midpoints, so t[0] = dt/2 recovers dt exactly
    dt = 2.0 * float(t[0])
    if len(t) > 1 and not np.allclose(np.diff(t), dt, rtol=0, atol=1e-9):
        raise ValueError("pulse CSV must be uniformly sampled")
    return Pulse(u, dt)


def pulse_to_string(pulse: Pulse) -> str:
    buf = io.StringIO()
    write_pulse_csv(buf, pulse)
    return buf.getvalue()
