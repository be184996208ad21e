"""Pulse-control workbench for entangling gates on a three-qutrit
tunable-coupler system."""

from .env import EnvConfig, EpisodeLog, PulseEnv, StepResult, reward
from .gates import (GateMetrics, closest_unitary, cost, effective_gate,
                    gate_concurrence, score_gate, unitarity,
                    weyl_coordinates)
from .oct import GuessPulse, OptimizerConfig, grape_optimize, gradient_jt, \
    make_guess, qsl_sweep
from .propagate import (PropagationDiverged, fidelity_state,
                        propagate_lindblad, propagate_piecewise,
                        step_propagator)
from .pulses import Pulse
from .scoring import GateSimulator, pulse_metrics
from .system import (AMP_CAP_GHZ, ExcitationSector, NoiseConfig,
                     SectorDecompositionUnavailable, SystemParams,
                     build_control, build_drift, build_ladder,
                     excitation_sectors)

__version__ = "0.1.0"

__all__ = [
    "AMP_CAP_GHZ", "EnvConfig", "EpisodeLog", "ExcitationSector",
    "GateMetrics", "GateSimulator", "GuessPulse", "NoiseConfig",
    "OptimizerConfig", "PropagationDiverged", "Pulse", "PulseEnv",
    "SectorDecompositionUnavailable", "StepResult", "SystemParams",
    "build_control", "build_drift", "build_ladder", "closest_unitary",
    "cost", "effective_gate", "excitation_sectors", "fidelity_state",
    "gate_concurrence", "grape_optimize", "gradient_jt", "make_guess",
    "propagate_lindblad", "propagate_piecewise", "pulse_metrics",
    "qsl_sweep", "reward", "score_gate", "step_propagator", "unitarity",
    "weyl_coordinates",
]
