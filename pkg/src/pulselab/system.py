"""Three-qutrit tunable-coupler system: parameters, Hamiltonians, sectors.

Basis ordering is |Q1 Q2 Qc> with flat index q1*L**2 + q2*L + qc for L
levels per subsystem. All config values are stored as omega/2pi in GHz;
Hamiltonian matrix entries are angular (rad/ns), i.e. multiplied by 2pi.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

TWO_PI = 2.0 * np.pi

#: amplitude cap used throughout, in GHz (cap on u, the GHz-valued control)
AMP_CAP_GHZ = 10.0 / np.pi


class SectorDecompositionUnavailable(Exception):
    """Raised when the Hamiltonian does not commute with the excitation
    number operator; callers must fall back to full-space propagation."""


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of the three-qutrit system (all omega/2pi, GHz)."""

    omega1: float = 5.8899
    omega2: float = 5.0311
    omegac: float = 7.445
    alpha1: float = 0.324
    alpha2: float = 0.235
    alphac: float = 0.230
    g1: float = 0.100
    g2: float = 0.0714
    omega_r: float = 6.0
    levels: int = 3

    def __post_init__(self):
        vals = (self.omega1, self.omega2, self.omegac, self.alpha1,
                self.alpha2, self.alphac, self.g1, self.g2, self.omega_r)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("all frequencies and couplings must be finite")
        if self.levels not in (3, 4, 5):
            raise ValueError(f"levels must be in {{3, 4, 5}}, got {self.levels}")

    @property
    def dim(self) -> int:
        return self.levels ** 3

    def detunings(self) -> tuple[float, float, float]:
        """(Delta_1, Delta_2, Delta_c) in GHz relative to omega_r."""
        return (self.omega1 - self.omega_r,
                self.omega2 - self.omega_r,
                self.omegac - self.omega_r)

    def with_qubit_offsets(self, d_omega1_ghz: float = 0.0,
                           d_omega2_ghz: float = 0.0) -> "SystemParams":
        """Copy with omega1/omega2 shifted by the given offsets (GHz)."""
        return replace(self, omega1=self.omega1 + d_omega1_ghz,
                       omega2=self.omega2 + d_omega2_ghz)


@dataclass(frozen=True)
class NoiseConfig:
    """Amplitude-damping configuration; t1 in microseconds."""

    t1: float = 100.0
    damp_qutrit1: bool = True
    damp_qutrit2: bool = True
    damp_coupler: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.t1) and self.t1 > 0):
            raise ValueError("t1 must be positive and finite")

    @property
    def rate_per_ns(self) -> float:
        """Decay rate 1/T1 in 1/ns (t1 is stored in microseconds)."""
        return 1.0 / (self.t1 * 1000.0)


def build_ladder(levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Truncated bosonic ladder operators (lower, raise).

    lower[m, m+1] = sqrt(m+1); raise is the conjugate transpose.
    """
    if levels < 2:
        raise ValueError(f"levels must be >= 2, got {levels}")
    lower = np.zeros((levels, levels), dtype=complex)
    for m in range(levels - 1):
        lower[m, m + 1] = np.sqrt(m + 1.0)
    return lower, lower.conj().T


def _embed(op: np.ndarray, slot: int, levels: int) -> np.ndarray:
    """Embed a single-subsystem operator into the three-body space."""
    eye = np.eye(levels, dtype=complex)
    factors = [eye, eye, eye]
    factors[slot] = op
    return np.kron(np.kron(factors[0], factors[1]), factors[2])


def lowering_operators(levels: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full-space lowering operators (a1, a2, b) for qutrit 1, 2, coupler."""
    low, _ = build_ladder(levels)
    return (_embed(low, 0, levels), _embed(low, 1, levels),
            _embed(low, 2, levels))


def number_operator(levels: int) -> np.ndarray:
    """Total excitation number N = a1'a1 + a2'a2 + b'b (full space)."""
    a1, a2, b = lowering_operators(levels)
    return a1.conj().T @ a1 + a2.conj().T @ a2 + b.conj().T @ b


def build_drift(params: SystemParams) -> np.ndarray:
    """Drift Hamiltonian H0 in rad/ns.

    H0 = Delta_c b'b + (alpha_c/2) b'b'bb
         + sum_j [Delta_j a_j'a_j + (alpha_j/2) a_j'a_j'a_j a_j
                  + g_j (b'a_j + b a_j')]

    Detunings/anharmonicities/couplings are the GHz values of
    ``params`` times 2pi. The vacuum energy is zero.
    """
    a1, a2, b = lowering_operators(params.levels)
    d1, d2, dc = params.detunings()

    def num(x):
        return x.conj().T @ x

    def kerr(x):
        return x.conj().T @ x.conj().T @ x @ x

    h = dc * num(b) + 0.5 * params.alphac * kerr(b)
    for aj, dj, alj, gj in ((a1, d1, params.alpha1, params.g1),
                            (a2, d2, params.alpha2, params.g2)):
        h = h + dj * num(aj) + 0.5 * alj * kerr(aj)
        h = h + gj * (b.conj().T @ aj + b @ aj.conj().T)
    return TWO_PI * h


def build_control(params: SystemParams) -> np.ndarray:
    """Control operator H1 = b'b (coupler number operator, dimensionless).

    The drive enters the propagator as 2pi * u(t) * H1 with u in GHz.
    """
    _, _, b = lowering_operators(params.levels)
    return b.conj().T @ b


def basis_index(occ: tuple[int, int, int], levels: int) -> int:
    """Flat index of |q1 q2 qc>."""
    q1, q2, qc = occ
    if not all(0 <= q < levels for q in occ):
        raise ValueError(f"occupation {occ} out of range for levels={levels}")
    return q1 * levels ** 2 + q2 * levels + qc


def basis_state(occ: tuple[int, int, int], levels: int) -> np.ndarray:
    psi = np.zeros(levels ** 3, dtype=complex)
    psi[basis_index(occ, levels)] = 1.0
    return psi


@dataclass(frozen=True)
class ExcitationSector:
    """Restriction of (H0, H1) to a total-excitation-number subspace."""

    n: int
    basis_indices: np.ndarray
    h0_block: np.ndarray
    h1_block: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.basis_indices)

    def position_of(self, full_index: int) -> int:
        """Position of a full-space basis index within the sector basis."""
        pos = np.nonzero(self.basis_indices == full_index)[0]
        if len(pos) != 1:
            raise ValueError(f"index {full_index} not in sector N={self.n}")
        return int(pos[0])


def excitation_sectors(h0: np.ndarray, h1: np.ndarray, max_n: int,
                       levels: int | None = None,
                       tol: float = 1e-12) -> list[ExcitationSector]:
    """Decompose (H0, H1) into excitation-number blocks N = 0..max_n.

    Verifies numerically that both operators commute with the total
    number operator; raises SectorDecompositionUnavailable otherwise so
    callers can fall back to full-space propagation. Basis indices inside
    each sector are in ascending full-space order.
    """
    if levels is None:
        levels = round(h0.shape[0] ** (1.0 / 3.0))
    nop = number_operator(levels)
    for name, h in (("H0", h0), ("H1", h1)):
        comm = h @ nop - nop @ h
        if np.abs(comm).max() > tol * max(1.0, np.abs(h).max()):
            raise SectorDecompositionUnavailable(
                f"[{name}, N] does not vanish "
                f"(max {np.abs(comm).max():.3e}); use full-space propagation")
    nvals = np.rint(np.diag(nop).real).astype(int)
    sectors = []
    for n in range(max_n + 1):
        idx = np.nonzero(nvals == n)[0]
        sectors.append(ExcitationSector(
            n=n,
            basis_indices=idx,
            h0_block=h0[np.ix_(idx, idx)].copy(),
            h1_block=h1[np.ix_(idx, idx)].copy(),
        ))
    return sectors
