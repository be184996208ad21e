"""Time propagation under piecewise-constant control.

Pure states evolve by the exact matrix exponential of each constant-u
step; density matrices evolve under the amplitude-damping master
equation with a fixed-step RK4 integrator. Integration failure is
detected through norm/trace drift and non-finite values.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .pulses import Pulse
from .system import (NoiseConfig, SystemParams, TWO_PI, build_control,
                     build_drift, excitation_sectors, lowering_operators,
                     number_operator)

NORM_DRIFT_LIMIT = 1e-6
TRACE_DRIFT_LIMIT = 1e-5
TRACE_RETRY_TOL = 1e-7


class PropagationDiverged(Exception):
    """Numerical integration failed (norm/trace drift or non-finite values)."""


def step_propagator(h0: np.ndarray, h1: np.ndarray, u: float,
                    dt: float) -> np.ndarray:
    """exp(-i (H0 + 2pi*u*H1) dt) for one constant-amplitude step.

    u is the control value in GHz, dt in ns; H0 in rad/ns, H1
    dimensionless. Computed with scipy's scaling-and-squaring expm;
    unitary to ~1e-14 for Hermitian blocks.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not np.isfinite(u):
        raise PropagationDiverged(f"non-finite control amplitude {u!r}")
    return scipy.linalg.expm(-1j * (h0 + TWO_PI * u * h1) * dt)


def step_propagators_batch(h0: np.ndarray, h1: np.ndarray,
                           us: np.ndarray, dt: float) -> np.ndarray:
    """Stack of exact step propagators for many amplitudes at once.

    Same semantics as :func:`step_propagator` (agrees to ~1e-13), via a
    batched Hermitian eigendecomposition, which is much faster than one
    expm call per step in hot loops.
    """
    us = np.asarray(us, dtype=float)
    if not np.all(np.isfinite(us)):
        raise PropagationDiverged("non-finite control amplitude in pulse")
    h = h0[None, :, :] + TWO_PI * us[:, None, None] * h1[None, :, :]
    w, v = np.linalg.eigh(h)
    phases = np.exp(-1j * w * dt)
    return np.einsum("kij,kj,klj->kil", v, phases, v.conj())


def _check_norm(psi: np.ndarray) -> None:
    nrm = np.linalg.norm(psi)
    if not np.isfinite(nrm) or abs(nrm - 1.0) > NORM_DRIFT_LIMIT:
        raise PropagationDiverged(f"state norm drifted to {nrm!r}")


def propagate_states(h0: np.ndarray, h1: np.ndarray, states: np.ndarray,
                     us: np.ndarray, dt: float,
                     keep_trajectory: bool = True) -> np.ndarray:
    """Propagate one or more column states through a piecewise pulse.

    states: (dim,) or (m, dim). Returns trajectory of shape
    (n_steps+1, ...) when keep_trajectory, else the final state(s).
    """
    single = states.ndim == 1
    cur = np.atleast_2d(states).astype(complex)
    props = step_propagators_batch(h0, h1, us, dt)
    out = [cur.copy()] if keep_trajectory else None
    for k in range(len(us)):
        cur = cur @ props[k].T
        if keep_trajectory:
            out.append(cur.copy())
    for row in cur:
        _check_norm(row)
    if keep_trajectory:
        traj = np.array(out)
        return traj[:, 0, :] if single else traj
    return cur[0] if single else cur


def propagate_piecewise(params: SystemParams, pulse: Pulse,
                        initial: np.ndarray,
                        use_sectors: bool = True) -> np.ndarray:
    """Schroedinger evolution of a pure state; returns the trajectory
    (n_steps+1, dim) in the full space.

    When the initial state is supported on a single excitation sector
    (and the Hamiltonian conserves excitation number), the evolution
    runs on the sector block and is embedded back; the public contract
    is full-space semantics either way.
    """
    initial = np.asarray(initial, dtype=complex)
    if initial.shape != (params.dim,):
        raise ValueError(f"initial state has dim {initial.shape}, "
                         f"expected ({params.dim},)")
    nrm = np.linalg.norm(initial)
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"initial state not normalized (norm {nrm})")

    h0 = build_drift(params)
    h1 = build_control(params)
    us = pulse.amplitudes

    if use_sectors:
        nvals = np.rint(np.diag(number_operator(params.levels)).real).astype(int)
        support = np.nonzero(np.abs(initial) > 0)[0]
        occupied_n = set(nvals[support])
        if len(occupied_n) == 1:
            n = occupied_n.pop()
            sector = excitation_sectors(h0, h1, n, params.levels)[n]
            traj_block = propagate_states(sector.h0_block, sector.h1_block,
                                          initial[sector.basis_indices],
                                          us, pulse.dt)
            traj = np.zeros((len(us) + 1, params.dim), dtype=complex)
            traj[:, sector.basis_indices] = traj_block
            return traj

    return propagate_states(h0, h1, initial, us, pulse.dt)


def collapse_operators(params: SystemParams, noise: NoiseConfig) -> list[np.ndarray]:
    """Amplitude-damping collapse operators sqrt(1/T1) * (a1, a2, b)."""
    rate = noise.rate_per_ns
    a1, a2, b = lowering_operators(params.levels)
    ops = []
    for enabled, op in ((noise.damp_qutrit1, a1),
                        (noise.damp_qutrit2, a2),
                        (noise.damp_coupler, b)):
        if enabled:
            ops.append(np.sqrt(rate) * op)
    return ops


def propagate_lindblad(params: SystemParams, pulse: Pulse, noise: NoiseConfig | None,
                       initial_rho: np.ndarray,
                       substeps: int = 1) -> np.ndarray:
    """Master-equation evolution of a density matrix.

    Split-step integrator per constant-amplitude step: the no-jump part
    (Hamiltonian plus the anticommutator of the damping) is applied as
    an exact exponential of the effective non-Hermitian Hamiltonian
    H - (i/2) sum C'C, and the jump term sum C rho C' enters through a
    midpoint quadrature propagated by half-steps. The map is completely
    positive by construction and exact for closed systems; the per-step
    error is O((Gamma*dt)^2) in the damping rate. Trace drift beyond
    tolerance triggers a sub-stepped retry, then PropagationDiverged.
    Returns the trajectory (n_steps+1, dim, dim). noise=None disables
    damping.
    """
    rho0 = np.asarray(initial_rho, dtype=complex)
    dim = params.dim
    if rho0.shape != (dim, dim):
        raise ValueError(f"density matrix has shape {rho0.shape}, "
                         f"expected ({dim}, {dim})")
    if np.abs(rho0 - rho0.conj().T).max() > 1e-10:
        raise ValueError("initial density matrix not Hermitian")
    if abs(np.trace(rho0).real - 1.0) > 1e-8:
        raise ValueError("initial density matrix trace != 1")

    h0 = build_drift(params)
    h1 = build_control(params)
    c_ops = collapse_operators(params, noise) if noise is not None else []
    anticomm = sum((c.conj().T @ c for c in c_ops),
                   np.zeros((dim, dim), dtype=complex))

    def run(nsub: int) -> np.ndarray:
        dt = pulse.dt / nsub
        rho = rho0.copy()
        traj = np.empty((len(pulse) + 1, dim, dim), dtype=complex)
        traj[0] = rho
        half_cache: dict[float, np.ndarray] = {}
        for k, u in enumerate(pulse.amplitudes):
            if not np.isfinite(u):
                raise PropagationDiverged("non-finite control amplitude")
            n_half = half_cache.get(u)
            if n_half is None:
                h_eff = h0 + TWO_PI * u * h1 - 0.5j * anticomm
                n_half = scipy.linalg.expm(-1j * h_eff * (dt / 2.0))
                if len(half_cache) < 8:
                    half_cache[u] = n_half
            for _ in range(nsub):
                mid = n_half @ rho @ n_half.conj().T
                if c_ops:
                    jump = sum(c @ mid @ c.conj().T for c in c_ops)
                    rho = (n_half @ mid @ n_half.conj().T
                           + dt * (n_half @ jump @ n_half.conj().T))
                else:
                    rho = n_half @ mid @ n_half.conj().T
            traj[k + 1] = rho
        return traj

    traj = run(substeps)
    drift = np.abs(np.einsum("kii->k", traj).real - 1.0).max()
    if drift > TRACE_RETRY_TOL and substeps == 1:
        traj = run(4)
        drift = np.abs(np.einsum("kii->k", traj).real - 1.0).max()
    if not np.isfinite(drift) or drift > TRACE_DRIFT_LIMIT:
        raise PropagationDiverged(f"density-matrix trace drifted by {drift!r}")
    return traj


def fidelity_state(ideal: np.ndarray, noisy_rho: np.ndarray) -> float:
    """Overlap |<psi|rho|psi>| between a pure reference and a density matrix.

    For rho = |psi><psi| this is 1; for the maximally mixed state it is
    1/dim. The Uhlmann state fidelity is the square root of this value
    (see :func:`uhlmann_fidelity`).
    """
    ideal = np.asarray(ideal)
    if ideal.shape[0] != noisy_rho.shape[0]:
        raise ValueError("dimension mismatch between state and density matrix")
    return float(abs(np.vdot(ideal, noisy_rho @ ideal)))


def uhlmann_fidelity(ideal: np.ndarray, noisy_rho: np.ndarray) -> float:
    """Uhlmann fidelity sqrt(<psi|rho|psi>) for a pure reference state."""
    return float(np.sqrt(fidelity_state(ideal, noisy_rho)))
