"""Episodic pulse-shaping environment.

Actions are K per-substep amplitude deltas, cumulatively summed onto the
running control value; the simulator advances the three tracked basis
states |010>, |100>, |110> (the |000> column is constant) and the agent
observes polar-encoded statevector components, normalized time, and its
last deltas. Reward is -log10(J_T) minus a total-variation penalty;
amplitude-cap violations and integration failures truncate the episode
with reward -10.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .gates import score_gate
from .propagate import PropagationDiverged, step_propagators_batch
from .pulses import Pulse
from .system import (AMP_CAP_GHZ, SystemParams, basis_index, build_control,
                     build_drift, excitation_sectors)

JT_FLOOR = 1e-12
TRUNCATION_REWARD = -10.0

#: observation component lists (full-space occupations), fixed order
OBS_COMPONENTS_N1 = ((0, 0, 1), (0, 1, 0), (1, 0, 0))
OBS_COMPONENTS_N2 = ((0, 0, 2), (0, 1, 1), (0, 2, 0),
                     (1, 0, 1), (1, 1, 0), (2, 0, 0))


@dataclass(frozen=True)
class EnvConfig:
    k: int = 3                       # substeps per env step
    dt: float = 0.05                 # ns
    t_max: float = 50.0              # ns
    amp_cap: float = AMP_CAP_GHZ    # GHz
    delta_cap: float = 0.2           # GHz per substep
    alpha_tv: float = 1e-3
    randomization_pct: float = 0.0   # fractional omega1/omega2 perturbation
    seed: int | None = None
    tv_signed: bool = False          # penalize signed delta sum instead of |.|

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.t_max / self.dt < self.k:
            raise ValueError("t_max/dt must be >= k")
        if self.amp_cap <= 0:
            raise ValueError("amp_cap must be positive")

    @property
    def total_substeps(self) -> int:
        return math.ceil(self.t_max / self.dt)

    @property
    def max_segments(self) -> int:
        return math.ceil(self.total_substeps / self.k)

    @property
    def observation_size(self) -> int:
        return 24 + 1 + self.k


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    info: dict


@dataclass
class EpisodeLog:
    """Full pulse plus per-step metrics of one episode.

    When the episode was truncated, ``rewards`` carries the trailing -10
    entry while the metric arrays cover only the completed steps.
    """

    pulse: Pulse | None
    rewards: np.ndarray
    concurrence: np.ndarray
    unitarity: np.ndarray
    cost: np.ndarray
    omega1: float
    omega2: float
    truncated: bool = False
    config: dict = field(default_factory=dict)

    @property
    def episode_return(self) -> float:
        return float(np.sum(self.rewards))

    def to_csv(self, path: str | Path) -> None:
        """One row per substep (step,t_ns,u_ghz,reward,C,U,J_T); metrics
        repeat within a segment. A JSON sidecar '<path>.json' carries the
        config and the perturbed frequencies."""
        path = Path(path)
        k = max(1, int(self.config.get("k", 3)))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "t_ns", "u_ghz", "reward", "C", "U", "J_T"])
            if self.pulse is not None:
                dt = self.pulse.dt
                for i, u in enumerate(self.pulse.amplitudes):
                    seg = i // k
                    w.writerow([i, repr((i + 1) * dt), repr(float(u)),
                                repr(float(self.rewards[seg])),
                                repr(float(self.concurrence[seg])),
                                repr(float(self.unitarity[seg])),
                                repr(float(self.cost[seg]))])
        meta = dict(self.config)
        meta.update(omega1=self.omega1, omega2=self.omega2,
                    truncated=self.truncated, episode_return=self.episode_return)
        Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def reward(jt: float, deltas: np.ndarray, alpha_tv: float = 1e-3,
           signed: bool = False) -> float:
    """-log10(J_T) - (alpha_tv/K) * sum|delta_i| (J_T floored at 1e-12).

    The penalty uses absolute deltas by default; ``signed=True`` switches
    to the raw signed sum.
    """
    deltas = np.asarray(deltas, dtype=float)
    k = len(deltas)
    tv = np.sum(deltas) if signed else np.sum(np.abs(deltas))
    return float(-np.log10(max(jt, JT_FLOOR)) - (alpha_tv / k) * tv)


def truncation_check(u_values: np.ndarray, amp_cap: float,
                     propagation_ok: bool = True) -> bool:
    """True iff any amplitude strictly exceeds the cap (or is non-finite)
    or the propagation diverged. |u| == cap exactly does not truncate."""
    u_values = np.asarray(u_values, dtype=float)
    if not propagation_ok:
        return True
    if not np.all(np.isfinite(u_values)):
        return True
    return bool(np.any(np.abs(u_values) > amp_cap))


def encode_component(z: complex) -> tuple[float, float]:
    """Polar encoding (2|z| - 1, arg(z)/pi); the phase of 0 is 0."""
    return 2.0 * abs(z) - 1.0, np.angle(z) / np.pi


def encode_observation(s010: np.ndarray, s100: np.ndarray, s110: np.ndarray,
                       t_frac: float, last_deltas: np.ndarray) -> np.ndarray:
    """Fixed-order observation vector (24 state features, time, K deltas).

    s010/s100 are the N=1 sector components (|001>,|010>,|100>) of the
    states started in |010> and |100>; s110 the N=2 sector components
    (|002>,|011>,|020>,|101>,|110>,|200>) of the state started in |110>.
    """
    feats = []
    for z in (*s010, *s100, *s110):
        feats.extend(encode_component(z))
    feats.append(float(t_frac))
    feats.extend(np.asarray(last_deltas, dtype=float))
    return np.array(feats, dtype=float)


class PulseEnv:
    """Single-owner episodic environment; create one instance per worker."""

    def __init__(self, params: SystemParams | None = None,
                 config: EnvConfig | None = None):
        self.base_params = params if params is not None else SystemParams()
        if self.base_params.levels != 3:
            raise ValueError("environment runs on the 3-level training model")
        self.config = config if config is not None else EnvConfig()
        self._rng = np.random.default_rng(self.config.seed)
        self._done = True
        self._obs = None
        # filled at reset
        self.episode_params = self.base_params
        self._idx1 = None
        self._idx2 = None

    # ------------------------------------------------------------- reset
    def reset(self, seed: int | None = None) -> np.ndarray:
        cfg = self.config
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        params = self.base_params
        if cfg.randomization_pct > 0:
            d1 = self._rng.uniform(-1.0, 1.0) * cfg.randomization_pct * params.omega1
            d2 = self._rng.uniform(-1.0, 1.0) * cfg.randomization_pct * params.omega2
            params = params.with_qubit_offsets(d1, d2)
        self.episode_params = params

        h0 = build_drift(params)
        h1 = build_control(params)
        sectors = excitation_sectors(h0, h1, 2, params.levels)
        self._sec1, self._sec2 = sectors[1], sectors[2]
        L = params.levels
        self._idx1 = [self._sec1.position_of(basis_index(o, L))
                      for o in OBS_COMPONENTS_N1]
        self._idx2 = [self._sec2.position_of(basis_index(o, L))
                      for o in OBS_COMPONENTS_N2]

        self._s010 = np.zeros(self._sec1.dim, dtype=complex)
        self._s010[self._sec1.position_of(basis_index((0, 1, 0), L))] = 1.0
        self._s100 = np.zeros(self._sec1.dim, dtype=complex)
        self._s100[self._sec1.position_of(basis_index((1, 0, 0), L))] = 1.0
        self._s110 = np.zeros(self._sec2.dim, dtype=complex)
        self._s110[self._sec2.position_of(basis_index((1, 1, 0), L))] = 1.0

        self._u_last = 0.0
        self._substeps = 0
        self._last_deltas = np.zeros(cfg.k)
        self._done = False
        self._log_u: list[float] = []
        self._log_r: list[float] = []
        self._log_c: list[float] = []
        self._log_uy: list[float] = []
        self._log_jt: list[float] = []
        self._was_truncated = False
        self._obs = self._encode()
        return self._obs

    # -------------------------------------------------------------- step
    def step(self, action: np.ndarray) -> StepResult:
        if self._done:
            raise RuntimeError("step() called on a finished episode; call reset()")
        cfg = self.config
        deltas = np.clip(np.asarray(action, dtype=float).reshape(cfg.k),
                         -cfg.delta_cap, cfg.delta_cap)
        us = self._u_last + np.cumsum(deltas)

        if truncation_check(us, cfg.amp_cap):
            return self._truncate()
        try:
            p1 = step_propagators_batch(self._sec1.h0_block, self._sec1.h1_block,
                                        us, cfg.dt)
            p2 = step_propagators_batch(self._sec2.h0_block, self._sec2.h1_block,
                                        us, cfg.dt)
            s010, s100, s110 = self._s010, self._s100, self._s110
            for i in range(cfg.k):
                s010 = p1[i] @ s010
                s100 = p1[i] @ s100
                s110 = p2[i] @ s110
            norms = [np.linalg.norm(s010), np.linalg.norm(s100),
                     np.linalg.norm(s110)]
            if not all(np.isfinite(n) and abs(n - 1.0) <= 1e-6 for n in norms):
                raise PropagationDiverged("tracked-state norm drift")
        except PropagationDiverged:
            return self._truncate()

        self._s010, self._s100, self._s110 = s010, s100, s110
        self._u_last = float(us[-1])
        self._substeps += cfg.k
        self._last_deltas = deltas

        metrics = score_gate(self._effective_gate())
        rew = reward(metrics.cost, deltas, cfg.alpha_tv, cfg.tv_signed)

        self._log_u.extend(us.tolist())
        self._log_r.append(rew)
        self._log_c.append(metrics.concurrence)
        self._log_uy.append(metrics.unitarity)
        self._log_jt.append(metrics.cost)

        terminated = self._substeps >= cfg.total_substeps
        self._done = terminated
        self._obs = self._encode()
        info = {"J_T": metrics.cost, "C": metrics.concurrence,
                "U": metrics.unitarity, "t": self.t_ns}
        return StepResult(self._obs, rew, terminated, False, info)

    def _truncate(self) -> StepResult:
        self._done = True
        self._was_truncated = True
        # the -10 enters the return; there are no metrics for this step
        self._log_r.append(TRUNCATION_REWARD)
        info = {"J_T": None, "C": None, "U": None, "t": self.t_ns}
        return StepResult(self._obs, TRUNCATION_REWARD, False, True, info)

    # ----------------------------------------------------------- helpers
    @property
    def t_ns(self) -> float:
        return self._substeps * self.config.dt

    @property
    def done(self) -> bool:
        return self._done

    def _effective_gate(self) -> np.ndarray:
        gate = np.zeros((4, 4), dtype=complex)
        gate[0, 0] = 1.0
        i010, i100 = self._idx1[1], self._idx1[2]
        gate[1, 1], gate[2, 1] = self._s010[i010], self._s010[i100]
        gate[1, 2], gate[2, 2] = self._s100[i010], self._s100[i100]
        gate[3, 3] = self._s110[self._idx2[4]]
        return gate

    def _encode(self) -> np.ndarray:
        return encode_observation(self._s010[self._idx1],
                                  self._s100[self._idx1],
                                  self._s110[self._idx2],
                                  self.t_ns / self.config.t_max,
                                  self._last_deltas)

    def current_log(self) -> EpisodeLog:
        cfg = asdict(self.config)
        return EpisodeLog(
            pulse=Pulse(np.array(self._log_u), self.config.dt)
            if self._log_u else None,
            rewards=np.array(self._log_r),
            concurrence=np.array(self._log_c),
            unitarity=np.array(self._log_uy),
            cost=np.array(self._log_jt),
            omega1=self.episode_params.omega1,
            omega2=self.episode_params.omega2,
            truncated=self._was_truncated,
            config=cfg,
        )
