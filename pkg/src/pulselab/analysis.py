"""Spectra, filtering, sweeps, checkpoint-evolution heatmaps, and
open-system noise studies. CSV output is the contract of record; PNG
rendering is best-effort presentation."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.ndimage

from .env import EnvConfig, PulseEnv
from .propagate import propagate_lindblad, propagate_piecewise
from .pulses import Pulse
from .scoring import GateSimulator
from .system import AMP_CAP_GHZ, NoiseConfig, SystemParams, basis_state

LOG_FLOOR = 1e-12


# ------------------------------------------------------------------ FFT
def fft_spectrum(pulse: Pulse) -> tuple[np.ndarray, np.ndarray]:
    """One-sided amplitude spectrum (frequencies in GHz).

    Frequency resolution is 1/(N*dt); a pure on-bin tone of amplitude A
    shows a peak of height ~A, a constant pulse puts all energy in the
    zero bin.
    """
    u = pulse.amplitudes
    n = len(u)
    if n < 2:
        raise ValueError("pulse must have at least 2 samples")
    mags = np.abs(np.fft.rfft(u)) * (2.0 / n)
    mags[0] *= 0.5
    if n % 2 == 0:
        mags[-1] *= 0.5
    freqs = np.fft.rfftfreq(n, pulse.dt)
    return freqs, mags


def dominant_frequency(pulse: Pulse) -> float:
    """Frequency (GHz) of the largest nonzero-frequency spectral bin."""
    freqs, mags = fft_spectrum(pulse)
    nz = freqs > 0
    return float(freqs[nz][np.argmax(mags[nz])])


def spectral_filter(pulse: Pulse, cutoff: float,
                    amp_cap: float = AMP_CAP_GHZ) -> Pulse:
    """Zero all FFT bins strictly above ``cutoff`` (GHz), inverse
    transform, and re-clip to the amplitude cap."""
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    u = pulse.amplitudes
    spec = np.fft.rfft(u)
    freqs = np.fft.rfftfreq(len(u), pulse.dt)
    spec[freqs > cutoff] = 0.0
    filtered = np.fft.irfft(spec, n=len(u))
    return Pulse(np.clip(filtered, -amp_cap, amp_cap), pulse.dt)


def min_filter(series: np.ndarray, window: int) -> np.ndarray:
    """Sliding minimum with the given window length (samples)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    return scipy.ndimage.minimum_filter1d(np.asarray(series, dtype=float),
                                          size=window, mode="nearest")


def window_samples(window_ns: float, dt_ns: float) -> int:
    """Number of samples spanned by a time window (e.g. 1.05/0.05 = 21)."""
    return int(round(window_ns / dt_ns))


# --------------------------------------------------------------- tables
@dataclass
class HeatmapTable:
    """Rectangular grid of cell values with labeled coordinates.

    Failed cells are NaN. Equality (and the CSV round trip) treats NaN
    cells as equal.
    """

    row_coords: np.ndarray
    col_coords: np.ndarray
    values: np.ndarray
    row_label: str = "row"
    col_label: str = "col"
    value_label: str = "value"

    def __post_init__(self):
        self.row_coords = np.asarray(self.row_coords, dtype=float)
        self.col_coords = np.asarray(self.col_coords, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.row_coords), len(self.col_coords)):
            raise ValueError(f"values shape {self.values.shape} does not "
                             f"match coordinate lengths")

    def __eq__(self, other) -> bool:
        if not isinstance(other, HeatmapTable):
            return NotImplemented
        return ((self.row_label, self.col_label, self.value_label)
                == (other.row_label, other.col_label, other.value_label)
                and np.array_equal(self.row_coords, other.row_coords)
                and np.array_equal(self.col_coords, other.col_coords)
                and np.array_equal(self.values, other.values, equal_nan=True))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            header = [f"{self.row_label}|{self.col_label}|{self.value_label}"]
            header += [repr(float(c)) for c in self.col_coords]
            w.writerow(header)
            for r, row in zip(self.row_coords, self.values):
                w.writerow([repr(float(r))] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> "HeatmapTable":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or "|" not in rows[0][0]:
            raise ValueError("not a heatmap CSV (missing labeled header)")
        row_label, col_label, value_label = rows[0][0].split("|", 2)
        col_coords = np.array([float(c) for c in rows[0][1:]])
        row_coords = np.array([float(r[0]) for r in rows[1:]])
        values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
        return cls(row_coords, col_coords, values, row_label, col_label,
                   value_label)

    def render_png(self, path: str | Path, log_scale: bool = False) -> None:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(6, 5))
        extent = [self.col_coords[0], self.col_coords[-1],
                  self.row_coords[0], self.row_coords[-1]]
        data = np.log10(np.maximum(self.values, LOG_FLOOR)) if log_scale \
            else self.values
        im = ax.imshow(data, origin="lower", aspect="auto", extent=extent)
        ax.set_xlabel(self.col_label)
        ax.set_ylabel(self.row_label)
        fig.colorbar(im, ax=ax, label=self.value_label)
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)


# --------------------------------------------------------------- sweeps
def robustness_sweep(params: SystemParams, pulse: Pulse,
                     d_omega1_mhz, d_omega2_mhz,
                     progress=None) -> HeatmapTable:
    """log10(J_T) of a fixed pulse under static qubit-frequency offsets.

    Every cell is computed independently (no symmetry assumed); rows are
    omega_1 offsets, columns omega_2 offsets, both in MHz.
    """
    d1 = np.asarray(list(d_omega1_mhz), dtype=float)
    d2 = np.asarray(list(d_omega2_mhz), dtype=float)
    values = np.empty((len(d1), len(d2)))
    for i, off1 in enumerate(d1):
        for j, off2 in enumerate(d2):
            p = params.with_qubit_offsets(off1 / 1000.0, off2 / 1000.0)
            jt = GateSimulator(p, pulse.dt).cost_of(pulse.amplitudes)
            values[i, j] = np.log10(max(jt, LOG_FLOOR))
            if progress is not None:
                progress(off1, off2, values[i, j])
    return HeatmapTable(d1, d2, values, "domega1_mhz", "domega2_mhz",
                        "log10_jt")


def policy_sweep(policy, params: SystemParams, env_config: EnvConfig,
                 d_omega1_mhz, d_omega2_mhz,
                 terminal_window_ns: float = 5.0,
                 minfilter_ns: float = 1.05,
                 progress=None) -> tuple[HeatmapTable, HeatmapTable, HeatmapTable]:
    """Per cell: roll one deterministic episode of the policy in an
    environment built with the perturbed frequencies; report the best
    per-step reward within the final window plus the matching errors
    1-C and min-filtered 1-U at that step."""
    from .trpo.core import evaluate

    d1 = np.asarray(list(d_omega1_mhz), dtype=float)
    d2 = np.asarray(list(d_omega2_mhz), dtype=float)
    rew = np.full((len(d1), len(d2)), np.nan)
    cerr = np.full((len(d1), len(d2)), np.nan)
    uerr = np.full((len(d1), len(d2)), np.nan)
    seg_ns = env_config.k * env_config.dt
    n_win = max(1, int(round(terminal_window_ns / seg_ns)))
    w_filt = max(1, int(round(minfilter_ns / seg_ns)))
    for i, off1 in enumerate(d1):
        for j, off2 in enumerate(d2):
            p = params.with_qubit_offsets(off1 / 1000.0, off2 / 1000.0)
            env = PulseEnv(p, env_config)
            log = evaluate(policy, env, episodes=1, deterministic=True,
                           seed=0)[0]
            if len(log.cost):
                window = log.rewards[-n_win:] if not log.truncated \
                    else log.rewards[:-1][-n_win:]
                if len(window):
                    best = int(np.argmax(window))
                    offset = len(log.cost) - len(window)
                    rew[i, j] = window[best]
                    cerr[i, j] = 1.0 - log.concurrence[offset + best]
                    uerr[i, j] = min_filter(1.0 - log.unitarity, w_filt)[offset + best]
            if progress is not None:
                progress(off1, off2, rew[i, j])
    mk = lambda vals, label: HeatmapTable(d1, d2, vals, "domega1_mhz",
                                          "domega2_mhz", label)
    return (mk(rew, "reward"), mk(cerr, "concurrence_error"),
            mk(uerr, "unitarity_error_minfilt"))


def checkpoint_evolution(checkpoint_paths, env: PulseEnv,
                         minfilter_ns: float = 1.05,
                         progress=None) -> dict[str, HeatmapTable]:
    """Deterministic episode per checkpoint; rows are checkpoints
    (global step), columns frequency bins or pulse durations.

    Returns tables: 'spectra' (FFT amplitude), 'reward' (per step),
    'concurrence_error' (log10(1-C)), 'unitarity_error' (1-U after a
    minimum filter over the pulse-time axis)."""
    from .trpo.core import evaluate, load_checkpoint

    paths = list(checkpoint_paths)
    if not paths:
        raise ValueError("no checkpoints given")
    seg_ns = env.config.k * env.config.dt
    w_filt = max(1, int(round(minfilter_ns / seg_ns)))
    steps, spectra, rewards, cerrs, uerrs = [], [], [], [], []
    freqs = None
    n_seg = env.config.max_segments
    for path in paths:
        ck = load_checkpoint(path)
        policy = ck.make_policy()
        log = evaluate(policy, env, episodes=1, deterministic=True, seed=0)[0]
        steps.append(ck.global_step)
        # zero-pad truncated episodes to the full grid so rows line up
        n_sub = n_seg * env.config.k
        amps = np.zeros(n_sub)
        if log.pulse is not None:
            m = min(len(log.pulse), n_sub)
            amps[:m] = log.pulse.amplitudes[:m]
        freqs, mags = fft_spectrum(Pulse(amps, env.config.dt))
        spectra.append(mags)
        def pad(series):
            out = np.full(n_seg, np.nan)
            out[:len(series)] = series
            return out
        rewards.append(pad(log.rewards[:len(log.cost)]))
        cerrs.append(pad(np.log10(np.maximum(1.0 - log.concurrence, LOG_FLOOR))))
        uerrs.append(pad(min_filter(1.0 - log.unitarity, w_filt)
                         if len(log.unitarity) else []))
        if progress is not None:
            progress(path, log.episode_return)
    steps = np.asarray(steps, dtype=float)
    durations = (np.arange(n_seg) + 1) * seg_ns
    return {
        "spectra": HeatmapTable(steps, freqs, np.array(spectra),
                                "global_step", "freq_ghz", "fft_amplitude"),
        "reward": HeatmapTable(steps, durations, np.array(rewards),
                               "global_step", "t_ns", "reward"),
        "concurrence_error": HeatmapTable(steps, durations, np.array(cerrs),
                                          "global_step", "t_ns",
                                          "log10_concurrence_error"),
        "unitarity_error": HeatmapTable(steps, durations, np.array(uerrs),
                                        "global_step", "t_ns",
                                        "unitarity_error_minfilt"),
    }


# ---------------------------------------------------------- noise study
NOISE_INITIAL_STATES = ((0, 1, 0), (1, 0, 0), (1, 1, 0))


def noise_analysis(base_params: SystemParams, pulse: Pulse,
                   levels_list=(3, 4, 5), noise: NoiseConfig | None = None,
                   initial_states=NOISE_INITIAL_STATES,
                   progress=None) -> dict[tuple[str, int], np.ndarray]:
    """State infidelity 1 - F(t) of the damped evolution against the
    ideal closed-system evolution, per initial state and level count.

    F is the Uhlmann state fidelity sqrt(<psi|rho|psi>) of the pure
    reference against the density matrix. Returns arrays indexed by
    (state label, levels); time axis is the pulse grid.
    """
    if noise is None:
        noise = NoiseConfig()
    out: dict[tuple[str, int], np.ndarray] = {}
    for levels in levels_list:
        if levels not in (3, 4, 5):
            raise ValueError("levels must be within {3, 4, 5}")
        params = replace(base_params, levels=levels)
        for occ in initial_states:
            label = "".join(str(q) for q in occ)
            psi0 = basis_state(occ, levels)
            ideal = propagate_piecewise(params, pulse, psi0)
            rho0 = np.outer(psi0, psi0.conj())
            noisy = propagate_lindblad(params, pulse, noise, rho0)
            overlap = np.einsum("ti,tij,tj->t", ideal.conj(), noisy, ideal)
            fid = np.sqrt(np.abs(overlap))
            out[(label, levels)] = 1.0 - fid
            if progress is not None:
                progress(label, levels, float(out[(label, levels)][-1]))
    return out


def noise_analysis_to_csv(results: dict, pulse: Pulse, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "levels", "t_ns", "infidelity"])
        for (label, levels), series in sorted(results.items()):
            for k, val in enumerate(series):
                w.writerow([label, levels, repr(k * pulse.dt), repr(float(val))])
