"""Command-line front end.

Subcommands: solve (one analytic point), simulate (one run), sweep (grid to
CSV), compare (CSV(s) to a discrepancy report), fig4 (built-in benchmark
presets). Exit codes: 0 success, 1 parameter error, 2 failed comparison
check.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys

from . import config, harness
from .errors import NoConvergedPointError, ParameterError
from .harness import (
    METRIC_GOOD,
    METRIC_RAW,
    MODE_SIM,
    MODE_THEORY,
    CompareTolerances,
    SweepSpec,
    compare_check,
    emit_csv,
    find_optimal_m,
    model_inputs_for,
    parse_csv,
    run_sweep,
)
from .model import ModelInputs, SolverSettings, solve_no_timeout, solve_with_timeout
from .sim import ScenarioConfig, run_simulation

_METRICS = {"good": METRIC_GOOD, "raw": METRIC_RAW}
_MODES = {"theory": (MODE_THEORY,), "sim": (MODE_SIM,), "both": (MODE_THEORY, MODE_SIM)}


def _float_or_inf(raw: str) -> float:
    if raw.lower() in ("inf", "infinity"):
        return math.inf
    return float(raw)


def _add_solve(sub):
    p = sub.add_parser("solve", help="solve one analytic operating point")
    p.add_argument("--mu-up", type=float, required=True, help="uplink rate, packets/s")
    p.add_argument("--mu-down", type=float, default=None)
    p.add_argument("--m", type=int, required=True, help="threads per peer")
    p.add_argument("--tp", type=float, default=0.6)
    p.add_argument("--tout", type=_float_or_inf, default=math.inf)
    p.add_argument("--model", choices=("symmetric", "asymmetric"), default="symmetric")
    p.add_argument("--step", type=float, default=0.001)
    p.add_argument("--tolerance", type=float, default=0.001)
    p.add_argument("--rtt-max", type=float, default=60.0)


def _add_simulate(sub):
    p = sub.add_parser("simulate", help="run one simulation and print the report")
    p.add_argument("--config", help="scenario file (flat key=value)")
    p.add_argument("--peers", type=int, default=None)
    p.add_argument("--m", type=int, default=None, help="threads per peer")
    p.add_argument("--tout", type=_float_or_inf, default=None)
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--warmup", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trace", help="write the event trace to this file")


def _add_sweep(sub):
    p = sub.add_parser("sweep", help="run a sweep grid and write CSV")
    p.add_argument("--config", help="sweep file (flat key=value)")
    p.add_argument("--out", required=True, help="destination CSV")
    p.add_argument("--mode", choices=sorted(_MODES), default="both")
    p.add_argument("--metric", choices=sorted(_METRICS), default="good")
    p.add_argument("--seed", type=int, default=None, help="use this single seed")
    p.add_argument("--workers", type=int, default=1)


def _add_compare(sub):
    p = sub.add_parser("compare", help="compare theory and simulation rows")
    p.add_argument("csv", nargs="+", help="one mixed CSV or two CSVs")
    p.add_argument("--check", action="store_true", help="exit 2 when tolerances fail")
    p.add_argument("--gamma-tol", type=float, default=0.08)
    p.add_argument("--p-tol", type=float, default=0.08)
    p.add_argument("--m-tol", type=int, default=20)


def _add_fig4(sub):
    p = sub.add_parser("fig4", help="built-in benchmark preset sweep")
    p.add_argument("--out", required=True, help="destination CSV")
    p.add_argument("--mode", choices=sorted(_MODES), default="theory")
    p.add_argument("--metric", choices=sorted(_METRICS), default="good")
    p.add_argument("--adsl", action="store_true", help="asymmetric 256/512 kbps preset")
    p.add_argument("--seed", type=int, default=None, help="use this single seed")
    p.add_argument("--workers", type=int, default=1)


def _print_solution(inputs: ModelInputs, settings: SolverSettings) -> None:
    if math.isfinite(inputs.tout):
        sol = solve_with_timeout(inputs, settings)
    else:
        sol = solve_no_timeout(inputs)
    print(f"status: {sol.status}")
    if sol.converged:
        print(f"rtt_s: {sol.rtt:.6g}")
        print(f"x_s: {sol.x:.6g}")
        print(f"p_timeout: {sol.p_timeout:.6g}")
        print(f"gamma_raw: {sol.gamma_raw:.6g}")
        print(f"gamma_good: {sol.gamma_good:.6g}")


def _cmd_solve(args) -> int:
    inputs = ModelInputs(
        mu_up=args.mu_up, mu_down=args.mu_down, m=args.m,
        tp=args.tp, tout=args.tout, mode=args.model,
    )
    settings = SolverSettings(step=args.step, tolerance=args.tolerance, rtt_max=args.rtt_max)
    _print_solution(inputs, settings)
    return 0


def _cmd_simulate(args) -> int:
    if args.config:
        cfg = config.load_scenario(args.config)
    elif args.m is None:
        raise ParameterError("either --config or --m is required")
    else:
        cfg = ScenarioConfig(n_peers=args.peers or 110, threads_per_peer=args.m)
    overrides = {}
    if args.peers is not None:
        overrides["n_peers"] = args.peers
    if args.m is not None:
        overrides["threads_per_peer"] = args.m
    if args.tout is not None:
        overrides["tout"] = args.tout
    if args.duration is not None:
        overrides["sim_duration"] = args.duration
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    cfg.validate()
    report = run_simulation(cfg, trace_file=args.trace)
    for field in dataclasses.fields(report):
        value = getattr(report, field.name)
        print(f"{field.name}: {value:.6g}" if isinstance(value, float) else f"{field.name}: {value}")
    return 0


def _sweep_spec_from_args(args, preset: SweepSpec | None = None) -> SweepSpec:
    if getattr(args, "config", None):
        spec = config.load_sweep(args.config)
    elif preset is not None:
        spec = preset
    else:
        spec = harness.benchmark_spec()
    overrides = {"modes": _MODES[args.mode], "metric": _METRICS[args.metric]}
    if args.seed is not None:
        overrides["seeds"] = (args.seed,)
    return dataclasses.replace(spec, **overrides)


def _run_and_report(spec: SweepSpec, args) -> int:
    spec.validate()
    rows = run_sweep(spec, workers=args.workers)
    emit_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    for tout in spec.tout_values:
        for mode in spec.modes:
            if mode == MODE_SIM and not math.isfinite(tout):
                continue
            try:
                best = find_optimal_m(rows, tout, mode, spec.metric)
                print(f"optimal m [{mode}, tout={tout:g}, {spec.metric}]: {best}")
            except NoConvergedPointError:
                print(f"optimal m [{mode}, tout={tout:g}, {spec.metric}]: no converged rows")
    return 0


def _cmd_sweep(args) -> int:
    return _run_and_report(_sweep_spec_from_args(args), args)


def _cmd_fig4(args) -> int:
    preset = harness.adsl_spec() if args.adsl else harness.benchmark_spec()
    args.config = None
    return _run_and_report(_sweep_spec_from_args(args, preset), args)


def _cmd_compare(args) -> int:
    rows = []
    for path in args.csv:
        rows.extend(parse_csv(path))
    tol = CompareTolerances(
        gamma_good=args.gamma_tol, p_timeout=args.p_tol, optimal_m=args.m_tol
    )
    ok, text = compare_check(rows, tol)
    print(text)
    if args.check and not ok:
        return 2
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="m2mlab",
        description="windowed swarm transport lab: analytic model, simulator, sweeps",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_solve(sub)
    _add_simulate(sub)
    _add_sweep(sub)
    _add_compare(sub)
    _add_fig4(sub)
    args = parser.parse_args(argv)
    handlers = {
        "solve": _cmd_solve,
        "simulate": _cmd_simulate,
        "sweep": _cmd_sweep,
        "compare": _cmd_compare,
        "fig4": _cmd_fig4,
    }
    try:
        return handlers[args.command](args)
    except (ParameterError, NoConvergedPointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
