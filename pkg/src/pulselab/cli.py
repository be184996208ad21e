"""Command-line front door.

Subcommands: train, evaluate, gate-info, oct optimize, oct qsl,
sweep-robustness, sweep-policy, spectra, filter, noise, evolve-heatmaps.
Every subcommand accepts --config (TOML) and --seed. Exit codes: 0 ok,
2 usage error, 1 runtime failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .config import load_config
from .env import EnvConfig, PulseEnv
from .gates import read_gate_csv, score_gate, weyl_coordinates, closest_unitary
from .oct import GuessPulse, OptimizerConfig, grape_optimize, qsl_sweep
from .pulses import Pulse
from .system import NoiseConfig


def _offsets_mhz(params, span_pct: float, points: int, which: int) -> np.ndarray:
    nominal = params.omega1 if which == 1 else params.omega2
    span = span_pct / 100.0 * nominal * 1000.0  # MHz
    return np.linspace(-span, span, points)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None,
                   help="TOML config file ([system]/[env]/[train]/[oct]/[sweep])")
    p.add_argument("--seed", type=int, default=0,
                   help="base random seed threaded through all RNGs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulselab",
        description="Entangling-gate pulse workbench: simulator, RL "
                    "environment/trainer, optimal-control baseline, analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run TRPO training")
    _add_common(p)
    p.add_argument("--workdir", type=Path, required=True)
    p.add_argument("--max-timesteps", type=int, default=None)

    p = sub.add_parser("evaluate", help="deterministic policy evaluation")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--stochastic", action="store_true")
    p.add_argument("--out", type=Path, required=True,
                   help="episode-log CSV prefix (one file per episode)")

    p = sub.add_parser("gate-info", help="score a 4x4 gate matrix (CSV re,im pairs)")
    _add_common(p)
    p.add_argument("matrix", type=Path)

    p = sub.add_parser("oct", help="optimal-control baseline")
    oct_sub = p.add_subparsers(dest="oct_command", required=True)

    po = oct_sub.add_parser("optimize", help="optimize a pulse against J_T")
    _add_common(po)
    po.add_argument("--guess", choices=["flat_top", "single_frequency"],
                    default=None)
    po.add_argument("--T", type=float, default=None, help="duration ns")
    po.add_argument("--cap", type=float, default=None, help="amplitude cap GHz")
    po.add_argument("--max-iters", type=int, default=None)
    po.add_argument("--method", choices=["lbfgs", "gd"], default=None)
    po.add_argument("--out", type=Path, required=True)
    po.add_argument("--trace-out", type=Path, default=None)

    pq = oct_sub.add_parser("qsl", help="quantum-speed-limit sweep")
    _add_common(pq)
    pq.add_argument("--caps", type=str, required=True,
                    help="comma-separated caps in GHz")
    pq.add_argument("--tmin", type=float, required=True)
    pq.add_argument("--tmax", type=float, required=True)
    pq.add_argument("--step", type=float, default=1.0)
    pq.add_argument("--restarts", type=int, default=3)
    pq.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("sweep-robustness",
                       help="J_T of a fixed pulse over frequency offsets")
    _add_common(p)
    p.add_argument("--pulse", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--png", type=Path, default=None)

    p = sub.add_parser("sweep-policy",
                       help="policy-generated pulses over frequency offsets")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out-prefix", type=Path, required=True)
    p.add_argument("--png", action="store_true")

    p = sub.add_parser("spectra", help="FFT magnitude spectrum of a pulse")
    _add_common(p)
    p.add_argument("--pulse", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("filter", help="low-pass spectral filter of a pulse")
    _add_common(p)
    p.add_argument("--pulse", type=Path, required=True)
    p.add_argument("--cutoff", type=float, default=None, help="GHz")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("noise", help="T1 noise study of a pulse")
    _add_common(p)
    p.add_argument("--pulse", type=Path, required=True)
    p.add_argument("--t1-us", type=float, default=100.0)
    p.add_argument("--levels", type=str, default="3,4,5")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("evolve-heatmaps",
                       help="training-evolution heatmaps from a checkpoint dir")
    _add_common(p)
    p.add_argument("--checkpoint-dir", type=Path, required=True)
    p.add_argument("--out-prefix", type=Path, required=True)
    p.add_argument("--png", action="store_true")
    return parser


def _cmd_train(args) -> int:
    import dataclasses as dc
    from .trpo.core import train

    cfg = load_config(args.config)
    train_cfg = dc.replace(cfg.train, seed=args.seed)
    if args.max_timesteps is not None:
        train_cfg = dc.replace(train_cfg, max_timesteps=args.max_timesteps)
    env_cfg = cfg.env

    def factory(i):
        return PulseEnv(cfg.system, env_cfg)

    result = train(factory, train_cfg, args.workdir)
    print(f"finished at step {result.global_step}; "
          f"final checkpoint {result.final_checkpoint}")
    print(f"metrics: {result.metrics_path}")
    return 0


def _cmd_evaluate(args) -> int:
    from .trpo.core import evaluate, load_checkpoint

    cfg = load_config(args.config)
    ck = load_checkpoint(args.checkpoint)
    policy = ck.make_policy()
    env = PulseEnv(cfg.system, cfg.env)
    logs = evaluate(policy, env, args.episodes,
                    deterministic=not args.stochastic, seed=args.seed)
    out = Path(args.out)
    for i, log in enumerate(logs):
        log.to_csv(out.parent / f"{out.stem}_{i:03d}{out.suffix or '.csv'}")
    returns = [log.episode_return for log in logs]
    print(f"episodes: {len(logs)}  mean return: {np.mean(returns):.4f}")
    return 0


def _cmd_gate_info(args) -> int:
    gate = read_gate_csv(args.matrix)
    metrics = score_gate(gate)
    print(f"C   = {metrics.concurrence:.9f}"
          + ("" if metrics.concurrence_defined else "  (rank-deficient gate)"))
    print(f"U   = {metrics.unitarity:.9f}")
    print(f"J_T = {metrics.cost:.9f}")
    if metrics.concurrence_defined:
        c = weyl_coordinates(closest_unitary(gate), check_unitary=False)
        print(f"weyl (c1,c2,c3) = ({c[0]:.9f}, {c[1]:.9f}, {c[2]:.9f}) rad")
    return 0


def _cmd_oct_optimize(args) -> int:
    cfg = load_config(args.config)
    oct_cfg = cfg.oct
    kind = args.guess or oct_cfg.guess
    duration = args.T if args.T is not None else oct_cfg.duration
    cap = args.cap if args.cap is not None else oct_cfg.cap
    guess = GuessPulse(kind=kind, duration=duration, dt=oct_cfg.dt,
                       amplitude=min(oct_cfg.amplitude, cap),
                       rise=oct_cfg.rise, frequency=oct_cfg.frequency)
    opt_cfg = OptimizerConfig(
        max_iters=args.max_iters or oct_cfg.max_iters,
        amp_cap=cap, method=args.method or oct_cfg.method,
        scheme=oct_cfg.scheme, convergence_jt=oct_cfg.threshold)
    pulse, trace = grape_optimize(cfg.system, guess, opt_cfg)
    pulse.to_csv(args.out)
    print(f"J_T: {trace.cost[0]:.3e} -> {trace.cost[-1]:.3e} "
          f"in {trace.iterations} iterations"
          + ("  [stalled]" if trace.stalled else ""))
    if args.trace_out is not None:
        import csv as _csv
        with open(args.trace_out, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(["iteration", "J_T", "C", "U"])
            for i, (jt, c, u) in enumerate(zip(trace.cost, trace.concurrence,
                                               trace.unitarity)):
                w.writerow([i, repr(jt), repr(c), repr(u)])
    return 0


def _cmd_oct_qsl(args) -> int:
    cfg = load_config(args.config)
    caps = [float(c) for c in args.caps.split(",") if c]
    n = int(round((args.tmax - args.tmin) / args.step)) + 1
    durations = [args.tmin + i * args.step for i in range(n)]
    result = qsl_sweep(cfg.system, durations, caps, restarts=args.restarts,
                       dt=cfg.oct.dt, threshold=cfg.oct.threshold,
                       seed=args.seed,
                       progress=lambda cap, t, jt: print(
                           f"  cap={cap:g} T={t:g} best J_T={jt:.3e}"))
    result.to_csv(args.out)
    for cap, q in result.qsl.items():
        print(f"QSL(cap={cap:g} GHz) = {q if q is not None else 'not reached'} ns")
    return 0


def _cmd_sweep_robustness(args) -> int:
    cfg = load_config(args.config)
    pulse = Pulse.from_csv(args.pulse)
    d1 = _offsets_mhz(cfg.system, cfg.sweep.span_pct, cfg.sweep.points, 1)
    d2 = _offsets_mhz(cfg.system, cfg.sweep.span_pct, cfg.sweep.points, 2)
    table = analysis.robustness_sweep(cfg.system, pulse, d1, d2)
    table.to_csv(args.out)
    if args.png is not None:
        table.render_png(args.png)
    print(f"origin cell log10(J_T) = "
          f"{table.values[len(d1) // 2, len(d2) // 2]:.4f}")
    return 0


def _cmd_sweep_policy(args) -> int:
    from .trpo.core import load_checkpoint

    cfg = load_config(args.config)
    ck = load_checkpoint(args.checkpoint)
    policy = ck.make_policy()
    d1 = _offsets_mhz(cfg.system, cfg.sweep.span_pct, cfg.sweep.points, 1)
    d2 = _offsets_mhz(cfg.system, cfg.sweep.span_pct, cfg.sweep.points, 2)
    rew, cerr, uerr = analysis.policy_sweep(
        policy, cfg.system, cfg.env, d1, d2,
        terminal_window_ns=cfg.sweep.terminal_window_ns,
        minfilter_ns=cfg.sweep.minfilter_ns)
    prefix = Path(args.out_prefix)
    for name, table in (("reward", rew), ("concurrence_error", cerr),
                        ("unitarity_error", uerr)):
        table.to_csv(f"{prefix}_{name}.csv")
        if args.png:
            table.render_png(f"{prefix}_{name}.png")
    print(f"wrote {prefix}_{{reward,concurrence_error,unitarity_error}}.csv")
    return 0


def _cmd_spectra(args) -> int:
    import csv as _csv

    pulse = Pulse.from_csv(args.pulse)
    freqs, mags = analysis.fft_spectrum(pulse)
    with open(args.out, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["freq_ghz", "magnitude"])
        for f, m in zip(freqs, mags):
            w.writerow([repr(float(f)), repr(float(m))])
    print(f"dominant nonzero-frequency peak: "
          f"{analysis.dominant_frequency(pulse):.4f} GHz")
    return 0


def _cmd_filter(args) -> int:
    cfg = load_config(args.config)
    pulse = Pulse.from_csv(args.pulse)
    cutoff = args.cutoff if args.cutoff is not None else cfg.sweep.cutoff_ghz
    filtered = analysis.spectral_filter(pulse, cutoff, cfg.env.amp_cap)
    filtered.to_csv(args.out)
    from .scoring import pulse_metrics
    jt0, _, _ = pulse_metrics(cfg.system, pulse)
    jt1, _, _ = pulse_metrics(cfg.system, filtered)
    print(f"J_T before/after filter: {jt0:.3e} / {jt1:.3e}")
    return 0


def _cmd_noise(args) -> int:
    cfg = load_config(args.config)
    pulse = Pulse.from_csv(args.pulse)
    levels = [int(v) for v in args.levels.split(",") if v]
    noise = NoiseConfig(t1=args.t1_us)
    results = analysis.noise_analysis(cfg.system, pulse, levels, noise)
    analysis.noise_analysis_to_csv(results, pulse, args.out)
    for (label, lv), series in sorted(results.items()):
        print(f"|{label}> levels={lv}: terminal infidelity {series[-1]:.3e}")
    return 0


def _cmd_evolve_heatmaps(args) -> int:
    cfg = load_config(args.config)
    paths = sorted(Path(args.checkpoint_dir).glob("ckpt_*.pt"))
    if not paths:
        raise FileNotFoundError(f"no ckpt_*.pt in {args.checkpoint_dir}")
    env = PulseEnv(cfg.system, cfg.env)
    tables = analysis.checkpoint_evolution(paths, env,
                                           minfilter_ns=cfg.sweep.minfilter_ns)
    prefix = Path(args.out_prefix)
    for name, table in tables.items():
        table.to_csv(f"{prefix}_{name}.csv")
        if args.png:
            table.render_png(f"{prefix}_{name}.png")
    print(f"wrote {len(tables)} heatmap tables with prefix {prefix}")
    return 0


_HANDLERS = {
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "gate-info": _cmd_gate_info,
    "sweep-robustness": _cmd_sweep_robustness,
    "sweep-policy": _cmd_sweep_policy,
    "spectra": _cmd_spectra,
    "filter": _cmd_filter,
    "noise": _cmd_noise,
    "evolve-heatmaps": _cmd_evolve_heatmaps,
}


def cli_dispatch(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    np.random.seed(args.seed % (2 ** 32))
    try:
        if args.command == "oct":
            handler = (_cmd_oct_optimize if args.oct_command == "optimize"
                       else _cmd_oct_qsl)
            return handler(args)
        return _HANDLERS[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
