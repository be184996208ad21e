"""Gradient-based optimal-control baseline.

Optimizes piecewise-constant pulses against the gate cost J_T starting
from guess pulses, and sweeps final time x amplitude cap to locate the
quantum speed limit. The cost gradient is a central finite difference
per amplitude, made cheap by caching forward states and backward
propagator products within the excitation sectors; an exact adjoint
gradient of the unitarity term (via the Frechet derivative of the step
exponential) doubles as a correctness oracle.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .gates import score_gates_batch
from .pulses import Pulse
from .scoring import GateSimulator
from .system import AMP_CAP_GHZ, SystemParams, TWO_PI

FD_STEP_GHZ = 1e-5


# --------------------------------------------------------------- guesses
@dataclass(frozen=True)
class GuessPulse:
    """Initial pulse for the optimizer: flat-top or single-frequency."""

    kind: str                      # "flat_top" | "single_frequency"
    duration: float                # ns
    dt: float = 0.05
    amplitude: float = 0.5         # GHz (plateau or tone amplitude)
    rise: float = 2.0              # ns, half-cosine ramp (flat_top)
    frequency: float = 0.8588      # GHz (single_frequency)

    def render(self) -> Pulse:
        n = int(round(self.duration / self.dt))
        t = (np.arange(n) + 0.5) * self.dt
        if self.kind == "flat_top":
            u = np.full(n, self.amplitude)
            rise = min(self.rise, self.duration / 2.0)
            if rise > 0:
                head = t < rise
                u[head] = self.amplitude * 0.5 * (1 - np.cos(np.pi * t[head] / rise))
                tail = t > self.duration - rise
                u[tail] = self.amplitude * 0.5 * (
                    1 - np.cos(np.pi * (self.duration - t[tail]) / rise))
        elif self.kind == "single_frequency":
            u = self.amplitude * np.sin(TWO_PI * self.frequency * t)
        else:
            raise ValueError(f"unknown guess kind {self.kind!r}")
        return Pulse(u, self.dt)


def make_guess(kind: str, duration: float, dt: float = 0.05,
               **params) -> GuessPulse:
    return GuessPulse(kind=kind, duration=duration, dt=dt, **params)


# ------------------------------------------------------------- optimizer
@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 200
    scheme: str = "jt_finite_difference"   # or "target_gate_analytic"
    fd_step: float = FD_STEP_GHZ           # GHz
    convergence_jt: float = 1e-4
    amp_cap: float = AMP_CAP_GHZ
    method: str = "lbfgs"                  # or "gd" (projected descent)
    target_gate: np.ndarray | None = None  # for the analytic scheme
    gd_initial_step: float = 0.05          # GHz per unit gradient norm
    gd_backtrack: float = 0.5
    gd_max_backtracks: int = 40
    min_improvement: float = 1e-10

    def __post_init__(self):
        if self.max_iters < 1 or self.fd_step <= 0 or self.amp_cap <= 0:
            raise ValueError("iteration budget, fd step, and cap must be positive")
        if self.scheme not in ("jt_finite_difference", "target_gate_analytic"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "target_gate_analytic" and self.target_gate is None:
            raise ValueError("target_gate_analytic requires a target gate")


@dataclass
class OptimizationTrace:
    """Accepted-iterate history; the recorded J_T sequence never increases."""

    cost: list[float] = field(default_factory=list)
    concurrence: list[float] = field(default_factory=list)
    unitarity: list[float] = field(default_factory=list)
    grad_norm: list[float] = field(default_factory=list)
    stalled: bool = False

    def record(self, jt: float, c: float, u: float, gnorm: float) -> None:
        if self.cost and jt > self.cost[-1]:
            return  # only accepted (non-increasing) iterates enter the trace
        self.cost.append(float(jt))
        self.concurrence.append(float(c))
        self.unitarity.append(float(u))
        self.grad_norm.append(float(gnorm))

    @property
    def iterations(self) -> int:
        return max(0, len(self.cost) - 1)


def gradient_jt(params: SystemParams, pulse: Pulse,
                h: float = FD_STEP_GHZ,
                engine: GateSimulator | None = None) -> np.ndarray:
    """Central finite difference of J_T per amplitude.

    Exploits sector-blocked propagation: forward partial states and
    backward propagator products are cached, so each perturbed amplitude
    costs two small step exponentials instead of a full re-propagation.
    Deterministic; equals naive per-amplitude recomputation to float
    accuracy.
    """
    eng = engine if engine is not None else GateSimulator(params, pulse.dt)
    us = pulse.amplitudes
    n = len(us)
    p1, p2, f010, f100, f110 = eng.forward(us)
    b1, b2 = eng.backward(p1, p2)

    shifted = np.concatenate([us + h, us - h])
    q1, q2 = eng.props(shifted)
    f010t = np.tile(f010[:-1], (2, 1))
    f100t = np.tile(f100[:-1], (2, 1))
    f110t = np.tile(f110[:-1], (2, 1))
    b1t = np.tile(b1[1:], (2, 1, 1))
    b2t = np.tile(b2[1:], (2, 1, 1))
    c010 = np.einsum("kij,kj->ki", b1t, np.einsum("kij,kj->ki", q1, f010t))
    c100 = np.einsum("kij,kj->ki", b1t, np.einsum("kij,kj->ki", q1, f100t))
    c110 = np.einsum("kij,kj->ki", b2t, np.einsum("kij,kj->ki", q2, f110t))
    jt, _, _ = score_gates_batch(eng.gates_from_columns(c010, c100, c110))
    return (jt[:n] - jt[n:]) / (2.0 * h)


def gradient_unitarity_adjoint(params: SystemParams, pulse: Pulse,
                               engine: GateSimulator | None = None) -> np.ndarray:
    """Exact adjoint gradient of U = Tr(O'O)/4 wrt each amplitude.

    dU_k/du is the Frechet derivative of the step exponential; the
    backward pass carries the mask of computational components. Serves
    as an independent oracle for the finite-difference gradient.
    """
    eng = engine if engine is not None else GateSimulator(params, pulse.dt)
    us = pulse.amplitudes
    n = len(us)
    p1, p2, f010, f100, f110 = eng.forward(us)
    b1, b2 = eng.backward(p1, p2)

    mask1 = np.zeros(eng.sec1.dim)
    mask1[[eng.i010, eng.i100]] = 1.0
    mask2 = np.zeros(eng.sec2.dim)
    mask2[eng.i110] = 1.0

    lam010 = mask1 * f010[-1]
    lam100 = mask1 * f100[-1]
    lam110 = mask2 * f110[-1]

    grad = np.zeros(n)
    e1 = TWO_PI * eng.sec1.h1_block
    e2 = TWO_PI * eng.sec2.h1_block
    for k in range(n):
        a1 = -1j * (eng.sec1.h0_block + TWO_PI * us[k] * eng.sec1.h1_block) * eng.dt
        a2 = -1j * (eng.sec2.h0_block + TWO_PI * us[k] * eng.sec2.h1_block) * eng.dt
        d1 = scipy.linalg.expm_frechet(a1, -1j * e1 * eng.dt,
                                       compute_expm=False)
        d2 = scipy.linalg.expm_frechet(a2, -1j * e2 * eng.dt,
                                       compute_expm=False)
        acc = 0.0
        for lam, b, d, f in ((lam010, b1, d1, f010), (lam100, b1, d1, f100),
                             (lam110, b2, d2, f110)):
            dpsi = b[k + 1] @ (d @ f[k])
            acc += 2.0 * np.real(np.vdot(lam, dpsi))
        grad[k] = acc / 4.0
    return grad


def _target_gate_cost_grad(eng: GateSimulator, us: np.ndarray,
                           target: np.ndarray) -> tuple[float, np.ndarray]:
    """1 - |Tr(G'O)|^2/16 and its exact gradient (analytic scheme)."""
    n = len(us)
    p1, p2, f010, f100, f110 = eng.forward(us)
    b1, b2 = eng.backward(p1, p2)
    gate = eng.gates_from_columns(f010[-1:], f100[-1:], f110[-1:])[0]
    ov = np.trace(target.conj().T @ gate)
    cost_val = 1.0 - (abs(ov) ** 2) / 16.0

    # dO/du_k columns, contracted against the fixed cofactor
    grad = np.zeros(n)
    w010 = target[:, 1].conj()
    w100 = target[:, 2].conj()
    w110 = target[:, 3].conj()
    for k in range(n):
        a1 = -1j * (eng.sec1.h0_block + TWO_PI * us[k] * eng.sec1.h1_block) * eng.dt
        a2 = -1j * (eng.sec2.h0_block + TWO_PI * us[k] * eng.sec2.h1_block) * eng.dt
        d1 = scipy.linalg.expm_frechet(
            a1, -1j * TWO_PI * eng.sec1.h1_block * eng.dt, compute_expm=False)
        d2 = scipy.linalg.expm_frechet(
            a2, -1j * TWO_PI * eng.sec2.h1_block * eng.dt, compute_expm=False)
        c010 = b1[k + 1] @ (d1 @ f010[k])
        c100 = b1[k + 1] @ (d1 @ f100[k])
        c110 = b2[k + 1] @ (d2 @ f110[k])
        dov = (w010[1] * c010[eng.i010] + w010[2] * c010[eng.i100]
               + w100[1] * c100[eng.i010] + w100[2] * c100[eng.i100]
               + w110[3] * c110[eng.i110])
        grad[k] = -2.0 * np.real(np.conj(ov) * dov) / 16.0
    return float(cost_val), grad


def grape_optimize(params: SystemParams, guess: GuessPulse | Pulse,
                   config: OptimizerConfig | None = None
                   ) -> tuple[Pulse, OptimizationTrace]:
    """Optimize a pulse against J_T (or a target-gate overlap).

    Amplitudes stay inside [-cap, cap] at every iterate. ``method="lbfgs"``
    (default) runs bound-constrained quasi-Newton descent on the
    finite-difference gradient; ``method="gd"`` is plain projected
    gradient descent with a halving backtracking line search (initial
    step ``gd_initial_step`` GHz per unit gradient norm). Accepted
    iterates never increase the cost. Returns the best pulse found and
    the trace; ``trace.stalled`` is set when no descent step was found
    within the budget.
    """
    cfg = config if config is not None else OptimizerConfig()
    pulse = guess.render() if isinstance(guess, GuessPulse) else guess
    pulse.check_cap(cfg.amp_cap)
    eng = GateSimulator(params, pulse.dt)

    if cfg.scheme == "target_gate_analytic":
        def cost_fn(us):
            return _target_gate_cost_grad(eng, us, cfg.target_gate)[0]

        def grad_fn(us):
            return _target_gate_cost_grad(eng, us, cfg.target_gate)[1]
    else:
        def cost_fn(us):
            return eng.cost_of(us)

        def grad_fn(us):
            return gradient_jt(params, Pulse(us, pulse.dt), cfg.fd_step, eng)

    def full_metrics(us):
        return eng.metrics_of(us)

    trace = OptimizationTrace()
    us = pulse.amplitudes.copy()
    jt, c, u = full_metrics(us)
    trace.record(jt, c, u, np.nan)
    if cost_fn(us) <= cfg.convergence_jt:
        return Pulse(us, pulse.dt), trace

    if cfg.method == "lbfgs":
        best = {"us": us.copy(), "f": cost_fn(us)}

        def f_and_g(x):
            f = cost_fn(x)
            g = grad_fn(x)
            if not np.all(np.isfinite(g)) or not np.isfinite(f):
                raise FloatingPointError("non-finite cost or gradient")
            return f, g

        def callback(xk):
            f = cost_fn(xk)
            if f < best["f"]:
                best["f"] = f
                best["us"] = xk.copy()
            jt_k, c_k, u_k = full_metrics(xk)
            trace.record(jt_k, c_k, u_k, np.nan)
            if f <= cfg.convergence_jt:
                raise StopIteration

        try:
            scipy.optimize.minimize(
                f_and_g, us, jac=True, method="L-BFGS-B",
                bounds=[(-cfg.amp_cap, cfg.amp_cap)] * len(us),
                callback=callback,
                options=dict(maxiter=cfg.max_iters, ftol=1e-18, gtol=1e-14,
                             maxcor=30))
        except (StopIteration, FloatingPointError):
            pass
        us = best["us"]
        trace.stalled = best["f"] > cfg.convergence_jt
        return Pulse(us, pulse.dt), trace

    if cfg.method != "gd":
        raise ValueError(f"unknown method {cfg.method!r}")

    alpha = None
    for _ in range(cfg.max_iters):
        if jt <= cfg.convergence_jt:
            break
        g = grad_fn(us)
        gnorm = float(np.linalg.norm(g))
        if not np.isfinite(gnorm) or gnorm == 0.0:
            trace.stalled = True
            break
        alpha = (cfg.gd_initial_step / gnorm) if alpha is None else alpha * 2.0
        accepted = False
        for _ in range(cfg.gd_max_backtracks):
            candidate = np.clip(us - alpha * g, -cfg.amp_cap, cfg.amp_cap)
            jt_c = cost_fn(candidate)
            if jt_c < jt - cfg.min_improvement:
                us = candidate
                jt, c, u = full_metrics(us)
                trace.record(jt, c, u, gnorm)
                accepted = True
                break
            alpha *= cfg.gd_backtrack
        if not accepted:
            trace.stalled = True
            break
    trace.stalled = trace.stalled or jt > cfg.convergence_jt
    return Pulse(us, pulse.dt), trace


# ------------------------------------------------------------- QSL sweep
@dataclass
class QslSweepResult:
    durations: np.ndarray                  # ns
    caps: np.ndarray                       # GHz
    best_cost: np.ndarray                  # (len(caps), len(durations))
    threshold: float
    qsl: dict                              # cap -> QSL ns (or None)

    def to_csv(self, path) -> None:
        import csv as _csv
        with open(path, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["cap_ghz", "duration_ns", "best_jt"])
            for i, cap in enumerate(self.caps):
                for j, t in enumerate(self.durations):
                    w.writerow([repr(float(cap)), repr(float(t)),
                                repr(float(self.best_cost[i, j]))])


def random_guess(duration: float, dt: float, cap: float,
                 rng: np.random.Generator) -> Pulse:
    """Randomized smooth guess: flat-top envelope times a random tone."""
    amp = rng.uniform(0.2, 0.8) * cap
    freq = rng.uniform(0.3, 1.5)
    phase = rng.uniform(0, 2 * np.pi)
    n = int(round(duration / dt))
    t = (np.arange(n) + 0.5) * dt
    rise = min(1.0, duration / 4.0)
    env = np.minimum(1.0, np.minimum(t, duration - t) / rise)
    u = amp * env * np.sin(2 * np.pi * freq * t + phase)
    return Pulse(np.clip(u, -cap, cap), dt)


def qsl_sweep(params: SystemParams, durations, caps, restarts: int = 3,
              dt: float = 0.05, threshold: float = 1e-4,
              max_iters: int = 500, seed: int = 0,
              progress=None) -> QslSweepResult:
    """Best J_T over restarts for each (duration, cap); the quantum speed
    limit per cap is the shortest duration reaching the threshold."""
    durations = np.asarray(list(durations), dtype=float)
    caps = np.asarray(list(caps), dtype=float)
    if restarts < 1 or len(durations) == 0 or len(caps) == 0:
        raise ValueError("need non-empty grids and restarts >= 1")
    best = np.full((len(caps), len(durations)), np.inf)
    rng = np.random.default_rng(seed)
    for i, cap in enumerate(caps):
        for j, t_final in enumerate(durations):
            for r in range(restarts):
                if r == 0:
                    guess = GuessPulse("flat_top", t_final, dt,
                                       amplitude=0.5 * cap,
                                       rise=min(2.0, t_final / 4)).render()
                else:
                    guess = random_guess(t_final, dt, cap, rng)
                cfg = OptimizerConfig(max_iters=max_iters, amp_cap=cap,
                                      convergence_jt=threshold)
                _, trace = grape_optimize(params, guess, cfg)
                best[i, j] = min(best[i, j], trace.cost[-1])
                if best[i, j] <= threshold:
                    break
            if progress is not None:
                progress(cap, t_final, best[i, j])
    qsl = {}
    for i, cap in enumerate(caps):
        ok = np.nonzero(best[i] <= threshold)[0]
        qsl[float(cap)] = float(durations[ok[0]]) if len(ok) else None
    return QslSweepResult(durations, caps, best, threshold, qsl)
