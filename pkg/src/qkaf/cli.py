"""``kaf`` command line: run, sweep, bench, properties, analyze."""

from __future__ import annotations

import argparse
import statistics
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import available_backends
from .analysis import (
    LyapunovSystem,
    MeanErrorConfig,
    complexity_delta,
    empirical_mean_error_check,
    format_report,
    lyapunov_steady_state,
    spectral_radius,
    theta_cost,
)
from .experiments import (
    ConfigError,
    Sweep,
    emit_results,
    load_config,
    run_experiment,
    run_sweep,
    write_timing,
)
from .signals import SCENARIO_NAMES


def _parse_values(text: str):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"--values: expected comma-separated numbers, got {text!r}") from None


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if getattr(args, "workers", None) is not None:
        cfg = replace(cfg, workers=args.workers)
    if getattr(args, "runs", None) is not None:
        cfg = replace(cfg, mc_runs=args.runs)
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    results = run_experiment(cfg)
    files = emit_results(results, args.out, cfg)
    for m in results:
        print(
            f"scenario={SCENARIO_NAMES.get(m.scenario, m.scenario)} filter={m.label} "
            f"steady_state_db={m.steady_state_db:.4f} H_mean={m.H_mean:.3f}"
        )
    print(f"wrote {len(files)} files to {args.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if args.param or args.values:
        if not (args.param and args.values):
            raise ConfigError("--param and --values must be given together")
        cfg = replace(cfg, sweep=Sweep(args.param, args.values))
    rows = run_sweep(cfg)
    print("scenario,filter,%s,steady_state_db,wall_per_iter,H_mean" % cfg.sweep.param)
    for r in rows:
        print(
            f"{SCENARIO_NAMES.get(r.scenario, r.scenario)},{r.filter},{r.value:g},"
            f"{r.steady_state_db:.4f},{r.wall_per_iter:.3e},{r.H_mean:.3f}"
        )
    if args.out:
        emit_results([], args.out, cfg, sweep_rows=rows)
    return 0


def cmd_bench(args) -> int:
    cfg = _load(args)
    backends = available_backends() if args.backend == "all" else [args.backend]
    print("backend,scenario,filter,wall_per_iter,theta_per_iter,H_mean")
    last = None
    for b in backends:
        reps = [run_experiment(cfg, backend=b) for _ in range(args.repeat)]
        for j, m in enumerate(reps[0]):
            wall = statistics.median(r[j].wall_per_iter for r in reps)
            th = statistics.median(r[j].theta_per_iter for r in reps)
            print(f"{b},{SCENARIO_NAMES.get(m.scenario, m.scenario)},{m.label},{wall:.3e},{th:.3e},{m.H_mean:.3f}")
        last = reps[-1]
    if args.out and last is not None:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_timing(last, Path(args.out) / "timing.csv")
    return 0


def cmd_properties(args) -> int:
    from .properties import run_all

    checks = run_all(args.seed)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} passed")
    return 1 if failed else 0


def cmd_analyze(args) -> int:
    out = {}
    for v in ("KRMEE", "QKRMEE", "KRGMEE", "QKRGMEE"):
        r = theta_cost(args.L, args.H, v)
        out.update({f"theta_cost.{v}.mults": r.mults, f"theta_cost.{v}.adds": r.adds, f"theta_cost.{v}.exps": r.exps})
    out["complexity_delta.MEE"] = complexity_delta(args.L, args.H, "MEE")
    out["complexity_delta.GMEE"] = complexity_delta(args.L, args.H, "GMEE")
    if not args.skip_mean_error:
        rep = empirical_mean_error_check(
            MeanErrorConfig(m=args.m, runs=args.runs, n_steps=args.steps, noise_std=args.noise_std, seed=args.seed)
        )
        out.update({f"mean_error.{k}": v for k, v in rep.as_dict().items()})
        if args.noise_std > 0:
            sys_ = LyapunovSystem(rep.R_last, rep.Xi_last)
            rho = spectral_radius(sys_.R)
            out["lyapunov.spectral_radius"] = rho
            if rho < 1.0:
                T = lyapunov_steady_state(sys_)
                out["lyapunov.trace"] = float(np.trace(T))
                out["lyapunov.residual"] = sys_.residual(T)
    sys.stdout.write(format_report(out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kaf", description="Quantized kernel recursive MEE/GMEE experiments")
    p.add_argument("--version", action="version", version=f"kaf {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="Monte Carlo convergence run; writes curves, summary and manifest")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--runs", type=int, help="override mc_runs")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="steady-state table over one parameter")
    s.add_argument("--config", required=True)
    s.add_argument("--param", choices=("L", "gamma", "alpha", "beta"))
    s.add_argument("--values", type=_parse_values)
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--runs", type=int)
    s.set_defaults(func=cmd_sweep)

    b = sub.add_parser("bench", help="per-iteration timing for each filter and kernel backend")
    b.add_argument("--config", required=True)
    b.add_argument("--backend", default="all", choices=("all", "cython", "python"))
    b.add_argument("--repeat", type=int, default=3)
    b.add_argument("--runs", type=int)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    pr = sub.add_parser("properties", help="criterion property and filter identity checks")
    pr.add_argument("--seed", type=int, default=0)
    pr.set_defaults(func=cmd_properties)

    a = sub.add_parser("analyze", help="complexity counts, mean-error and Lyapunov reports (key=value)")
    a.add_argument("--L", type=int, default=50)
    a.add_argument("--H", type=int, default=5)
    a.add_argument("--m", type=int, default=5)
    a.add_argument("--runs", type=int, default=200)
    a.add_argument("--steps", type=int, default=200)
    a.add_argument("--noise-std", type=float, default=0.1)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--skip-mean-error", action="store_true")
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, OSError) as exc:
        print(f"kaf: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
