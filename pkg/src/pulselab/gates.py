"""Effective-gate extraction and two-qubit gate scoring.

The effective gate O is the 4x4 matrix of overlaps of the evolved
computational-basis states with the computational basis, logical order
(|00>,|01>,|10>,|11>) <-> (|000>,|010>,|100>,|110>). O is generally
non-unitary due to leakage. Scores:

  unitarity   U = Tr(O'O)/4
  concurrence C, from the Weyl-chamber coordinates of the closest
              unitary (polar factor) of O
  cost        J_T = 1 - (C/4 + 3U/4)

Weyl-chamber coordinates here are radians with CNOT at (pi/4, 0, 0) and
the chamber canonicalized to pi/2 >= c1 >= c2 >= c3 >= 0; (c1,c2,c3) are
invariant under single-qubit rotations on either side.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: "magic" (Bell-like) basis change; nonlocal content of U appears in the
#: eigenphases of (Q'UQ)^T (Q'UQ)
MAGIC = (1.0 / np.sqrt(2.0)) * np.array(
    [[1, 0, 0, 1j],
     [0, 1j, 1, 0],
     [0, 1j, -1, 0],
     [1, 0, 0, -1j]], dtype=complex)

PE_SLACK = 1e-9
RANK_TOL = 1e-8

# named two-qubit gates (canonical basis)
IDENTITY4 = np.eye(4, dtype=complex)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0],
                 [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0],
                 [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
ISWAP = np.array([[1, 0, 0, 0], [0, 0, 1j, 0],
                  [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex)
SQRT_SWAP = np.array([[1, 0, 0, 0],
                      [0, (1 + 1j) / 2, (1 - 1j) / 2, 0],
                      [0, (1 - 1j) / 2, (1 + 1j) / 2, 0],
                      [0, 0, 0, 1]], dtype=complex)
SQRT_ISWAP = np.array([[np.sqrt(2), 0, 0, 0],
                       [0, 1, 1j, 0],
                       [0, 1j, 1, 0],
                       [0, 0, 0, np.sqrt(2)]], dtype=complex) / np.sqrt(2)


class ConcurrenceUndefined(Exception):
    """The gate is numerically rank-deficient; no meaningful polar factor."""


@dataclass(frozen=True)
class GateMetrics:
    concurrence: float
    unitarity: float
    cost: float
    #: False when the gate was too rank-deficient to unitarize (C reported 0)
    concurrence_defined: bool = True

    @property
    def as_dict(self) -> dict:
        return {"C": self.concurrence, "U": self.unitarity, "J_T": self.cost}


def effective_gate(states: np.ndarray, basis_indices: np.ndarray) -> np.ndarray:
    """O[i, j] = <basis_i | psi_j> for four evolved logical-basis states.

    states: (4, dim) rows are the time-t evolutions of
    |000>,|010>,|100>,|110>; basis_indices: the four full-space indices
    of those kets. The |000> row may be the (constant) vacuum state.
    """
    states = np.asarray(states, dtype=complex)
    if states.shape[0] != 4 or len(basis_indices) != 4:
        raise ValueError("need exactly four states and four basis indices")
    return states[:, basis_indices].T.copy()


def unitarity(gate: np.ndarray) -> float:
    """U = Tr(O'O)/4; 1 for unitary O, < 1 under leakage."""
    gate = np.asarray(gate)
    return float(np.einsum("ij,ij->", gate.conj(), gate).real / 4.0)


def unitarity_batch(gates: np.ndarray) -> np.ndarray:
    return np.einsum("kij,kij->k", gates.conj(), gates).real / 4.0


def closest_unitary(gate: np.ndarray) -> np.ndarray:
    """Polar factor W V' of the SVD O = W S V'.

    This is the unitary maximizing Re Tr(X'O); raises
    ConcurrenceUndefined when O is numerically rank-deficient.
    """
    w, s, vh = np.linalg.svd(np.asarray(gate, dtype=complex))
    if s[-1] <= RANK_TOL:
        raise ConcurrenceUndefined(
            f"smallest singular value {s[-1]:.3e} <= {RANK_TOL}")
    return w @ vh


def makhlin_invariants(u4: np.ndarray) -> np.ndarray:
    """Local invariants (Re g1, Im g1, g2) of a two-qubit unitary."""
    um = MAGIC.conj().T @ u4 @ MAGIC
    m = um.T @ um
    det = np.linalg.det(um)
    tr2 = np.trace(m) ** 2
    g1 = tr2 / (16.0 * det)
    g2 = (tr2 - np.trace(m @ m)) / (4.0 * det)
    return np.array([g1.real, g1.imag, g2.real])


def invariants_from_weyl(c: np.ndarray) -> np.ndarray:
    """Local invariants corresponding to Weyl coordinates (radians)."""
    c = np.atleast_2d(c)
    cos2, sin2 = np.cos(2 * c), np.sin(2 * c)
    g1 = np.prod(cos2 ** 2, axis=1) - np.prod(sin2 ** 2, axis=1)
    g2 = np.prod(np.sin(4 * c), axis=1) / 4.0
    g3 = 4 * g1 - np.prod(np.cos(4 * c), axis=1)
    out = np.stack([g1, g2, g3], axis=1)
    return out[0] if out.shape[0] == 1 else out


def weyl_coordinates_batch(u4s: np.ndarray, check_unitary: bool = True,
                           tol: float = 1e-8) -> np.ndarray:
    """Weyl-chamber coordinates of a stack (k, 4, 4) of unitaries.

    Eigenphase extraction: remove the global phase by det^(1/4)
    (principal root, folded into the spectrum), transform to the magic
    basis, take the eigenphases of M = (Q'UQ)^T (Q'UQ), solve for the
    coordinates, and canonicalize into the chamber. The candidate point
    is verified against the local-invariant values computed directly
    from U; a mirror-image point (conjugate equivalence class) is
    substituted when it matches the invariants better.
    """
    u4s = np.asarray(u4s, dtype=complex)
    if u4s.ndim != 3 or u4s.shape[-2:] != (4, 4):
        raise ValueError("expected a stack of 4x4 matrices")
    if check_unitary:
        gram = np.einsum("kji,kjl->kil", u4s.conj(), u4s)
        dev = np.abs(gram - np.eye(4)).max()
        if dev > tol:
            raise ValueError(f"input not unitary (deviation {dev:.3e})")

    ub = np.einsum("ij,kjl,lm->kim", MAGIC.conj().T, u4s, MAGIC)
    det = np.linalg.det(ub)
    m = np.einsum("kji,kjl->kil", ub, ub)  # UB^T UB
    ev = np.linalg.eigvals(m / np.sqrt(det)[:, None, None])

    two_s = np.angle(ev) / np.pi
    two_s = np.where(two_s <= -0.5, two_s + 2.0, two_s)
    s = -np.sort(-two_s / 2.0, axis=1)  # descending
    n = np.rint(s.sum(axis=1)).astype(int)
    pos = np.arange(4)[None, :]
    s = s - (pos < n[:, None])          # subtract 1 from the first n entries
    s = np.take_along_axis(s, (pos + n[:, None]) % 4, axis=1)  # roll by -n

    c1 = s[:, 0] + s[:, 1]
    c2 = s[:, 0] + s[:, 2]
    c3 = s[:, 1] + s[:, 2]
    flip = c3 < 0
    c1 = np.where(flip, 1.0 - c1, c1)
    c3 = np.where(flip, -c3, c3)
    c = np.stack([c1, c2, c3], axis=1) * (np.pi / 2.0)

    # pick the equivalence-class representative whose invariants match U
    tr = np.einsum("kii->k", m)
    tr2 = tr ** 2
    direct = np.stack([(tr2 / (16 * det)).real,
                       (tr2 / (16 * det)).imag,
                       ((tr2 - np.einsum("kij,kji->k", m, m)) / (4 * det)).real],
                      axis=1)
    mirror = c.copy()
    mirror[:, 0] = np.pi / 2.0 - c[:, 0]
    d_keep = np.abs(invariants_from_weyl(c) - direct).max(axis=1)
    d_mirror = np.abs(invariants_from_weyl(mirror) - direct).max(axis=1)
    c = np.where((d_mirror < d_keep)[:, None], mirror, c)

    # on the c3 = 0 face both mirror images are the same class; take c1 <= pi/4
    plane = c[:, 2] <= 1e-12
    c[plane, 0] = np.minimum(c[plane, 0], np.pi / 2.0 - c[plane, 0])
    c[plane, 2] = np.abs(c[plane, 2])
    return c


def weyl_coordinates(u4: np.ndarray, check_unitary: bool = True) -> np.ndarray:
    """Canonical Weyl-chamber coordinates (c1, c2, c3) of one unitary."""
    return weyl_coordinates_batch(np.asarray(u4)[None], check_unitary)[0]


def in_perfect_entangler_region(c: np.ndarray, slack: float = PE_SLACK) -> bool:
    """Whether a Weyl point lies in the perfect-entangler polyhedron.

    Boundary gates (e.g. sqrt(iSWAP)) classify as PE thanks to the slack.
    """
    c1, c2, c3 = c
    q = np.pi / 4.0
    return bool((c1 + c2 >= q - slack) and (c1 - c2 <= q + slack)
                and (c2 + c3 <= q + slack))


def concurrence_from_weyl(c: np.ndarray) -> float:
    """Gate concurrence of the equivalence class at Weyl point c."""
    if in_perfect_entangler_region(c):
        return 1.0
    c1, c2, c3 = c
    pairs = np.array([c1 - c2, c1 - c3, c2 - c3, c1 + c2, c1 + c3, c2 + c3])
    return float(np.abs(np.sin(2.0 * pairs)).max())


def concurrence_from_weyl_batch(cs: np.ndarray,
                                slack: float = PE_SLACK) -> np.ndarray:
    q = np.pi / 4.0
    pe = ((cs[:, 0] + cs[:, 1] >= q - slack)
          & (cs[:, 0] - cs[:, 1] <= q + slack)
          & (cs[:, 1] + cs[:, 2] <= q + slack))
    pairs = np.stack([cs[:, 0] - cs[:, 1], cs[:, 0] - cs[:, 2],
                      cs[:, 1] - cs[:, 2], cs[:, 0] + cs[:, 1],
                      cs[:, 0] + cs[:, 2], cs[:, 1] + cs[:, 2]], axis=1)
    val = np.abs(np.sin(2.0 * pairs)).max(axis=1)
    return np.where(pe, 1.0, val)


def gate_concurrence(u4: np.ndarray) -> float:
    """Maximum output-state concurrence of a two-qubit unitary over
    product inputs; exactly 1 inside the perfect-entangler polyhedron."""
    return concurrence_from_weyl(weyl_coordinates(u4))


def cost(concurrence: float, unitarity_value: float) -> float:
    """J_T = 1 - (C/4 + 3U/4); the 3:1 weighting balances leakage
    suppression against entangling power."""
    if not (-1e-9 <= concurrence <= 1.0 + 1e-9):
        raise ValueError(f"concurrence {concurrence} outside [0, 1]")
    if not (-1e-9 <= unitarity_value <= 1.0 + 1e-9):
        raise ValueError(f"unitarity {unitarity_value} outside [0, 1]")
    c = min(max(concurrence, 0.0), 1.0)
    u = min(max(unitarity_value, 0.0), 1.0)
    return 1.0 - (0.25 * c + 0.75 * u)


def score_gate(gate: np.ndarray) -> GateMetrics:
    """Full metric pipeline for one effective gate."""
    u = min(unitarity(gate), 1.0)
    try:
        x = closest_unitary(gate)
    except ConcurrenceUndefined:
        return GateMetrics(0.0, u, cost(0.0, u), concurrence_defined=False)
    c = gate_concurrence(x)
    return GateMetrics(c, u, cost(c, u))


def score_gates_batch(gates: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(J_T, C, U) arrays for a stack of effective gates (k, 4, 4)."""
    u = np.minimum(unitarity_batch(gates), 1.0)
    w, s, vh = np.linalg.svd(gates)
    x = w @ vh
    cs = weyl_coordinates_batch(x, check_unitary=False)
    conc = concurrence_from_weyl_batch(cs)
    conc = np.where(s[:, -1] <= RANK_TOL, 0.0, conc)
    conc = np.clip(conc, 0.0, 1.0)
    jt = 1.0 - (0.25 * conc + 0.75 * u)
    return jt, conc, u


def canonical_gate(c: np.ndarray) -> np.ndarray:
    """exp(i (c1 XX + c2 YY + c3 ZZ)) at Weyl point c (radians)."""
    import scipy.linalg
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    gen = (c[0] * np.kron(sx, sx) + c[1] * np.kron(sy, sy)
           + c[2] * np.kron(sz, sz))
    return scipy.linalg.expm(1j * gen)


def read_gate_csv(path) -> np.ndarray:
    """4x4 complex matrix from CSV rows of interleaved re,im pairs."""
    rows = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    if rows.shape != (4, 8):
        raise ValueError(f"expected 4 rows of 8 values (re,im pairs), "
                         f"got shape {rows.shape}")
    return rows[:, 0::2] + 1j * rows[:, 1::2]


def write_gate_csv(path, gate: np.ndarray) -> None:
    gate = np.asarray(gate, dtype=complex)
    flat = np.empty((4, 8))
    flat[:, 0::2] = gate.real
    flat[:, 1::2] = gate.imag
    np.savetxt(path, flat, delimiter=",", fmt="%.17g")
