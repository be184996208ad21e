"""Pulse-level gate scoring: propagate the logical basis columns within
their excitation sectors and reduce to (J_T, C, U)."""
from __future__ import annotations

import numpy as np

from .gates import score_gates_batch
from .propagate import step_propagators_batch
from .pulses import Pulse
from .system import SystemParams, basis_index, build_control, build_drift, \
    excitation_sectors


class GateSimulator:
    """Forward/backward sector propagation machinery for one parameter set.

    Precomputes the N=1 and N=2 blocks; reused across many pulse
    evaluations (sweeps, optimizer iterations).
    """

    def __init__(self, params: SystemParams, dt: float = 0.05):
        h0 = build_drift(params)
        h1 = build_control(params)
        secs = excitation_sectors(h0, h1, 2, params.levels)
        self.params = params
        self.sec1, self.sec2 = secs[1], secs[2]
        self.dt = dt
        L = params.levels
        self.i010 = self.sec1.position_of(basis_index((0, 1, 0), L))
        self.i100 = self.sec1.position_of(basis_index((1, 0, 0), L))
        self.i110 = self.sec2.position_of(basis_index((1, 1, 0), L))

    def props(self, us: np.ndarray):
        return (step_propagators_batch(self.sec1.h0_block, self.sec1.h1_block,
                                       us, self.dt),
                step_propagators_batch(self.sec2.h0_block, self.sec2.h1_block,
                                       us, self.dt))

    def forward(self, us: np.ndarray):
        """Partial states f[k] = column state before step k, k = 0..n."""
        n = len(us)
        p1, p2 = self.props(us)
        f010 = np.zeros((n + 1, self.sec1.dim), complex)
        f100 = np.zeros((n + 1, self.sec1.dim), complex)
        f110 = np.zeros((n + 1, self.sec2.dim), complex)
        f010[0, self.i010] = 1.0
        f100[0, self.i100] = 1.0
        f110[0, self.i110] = 1.0
        for k in range(n):
            f010[k + 1] = p1[k] @ f010[k]
            f100[k + 1] = p1[k] @ f100[k]
            f110[k + 1] = p2[k] @ f110[k]
        return p1, p2, f010, f100, f110

    def backward(self, p1: np.ndarray, p2: np.ndarray):
        """Products b[k] = U_{n-1} ... U_k with b[n] = identity."""
        n = len(p1)
        b1 = np.zeros((n + 1, self.sec1.dim, self.sec1.dim), complex)
        b2 = np.zeros((n + 1, self.sec2.dim, self.sec2.dim), complex)
        b1[n] = np.eye(self.sec1.dim)
        b2[n] = np.eye(self.sec2.dim)
        for k in range(n - 1, -1, -1):
            b1[k] = b1[k + 1] @ p1[k]
            b2[k] = b2[k + 1] @ p2[k]
        return b1, b2

    def gates_from_columns(self, c010: np.ndarray, c100: np.ndarray,
                           c110: np.ndarray) -> np.ndarray:
        m = c010.shape[0]
        gates = np.zeros((m, 4, 4), complex)
        gates[:, 0, 0] = 1.0
        gates[:, 1, 1] = c010[:, self.i010]
        gates[:, 2, 1] = c010[:, self.i100]
        gates[:, 1, 2] = c100[:, self.i010]
        gates[:, 2, 2] = c100[:, self.i100]
        gates[:, 3, 3] = c110[:, self.i110]
        return gates

    def final_gate(self, us: np.ndarray) -> np.ndarray:
        _, _, f010, f100, f110 = self.forward(us)
        return self.gates_from_columns(f010[-1:], f100[-1:], f110[-1:])[0]

    def cost_of(self, us: np.ndarray) -> float:
        jt, _, _ = score_gates_batch(self.final_gate(us)[None])
        return float(jt[0])

    def metrics_of(self, us: np.ndarray) -> tuple[float, float, float]:
        """(J_T, C, U) of the final-time gate."""
        jt, c, u = score_gates_batch(self.final_gate(us)[None])
        return float(jt[0]), float(c[0]), float(u[0])

    def metrics_series(self, us: np.ndarray, every: int = 1
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(t_ns, J_T, C, U) sampled every ``every`` substeps."""
        _, _, f010, f100, f110 = self.forward(us)
        idx = np.arange(every, len(us) + 1, every)
        gates = self.gates_from_columns(f010[idx], f100[idx], f110[idx])
        jt, c, u = score_gates_batch(gates)
        return idx * self.dt, jt, c, u


def pulse_metrics(params: SystemParams, pulse: Pulse) -> tuple[float, float, float]:
    """(J_T, C, U) of the gate realized by a pulse at its final time."""
    return GateSimulator(params, pulse.dt).metrics_of(pulse.amplitudes)
