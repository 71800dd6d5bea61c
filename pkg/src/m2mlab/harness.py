"""Sweeps over the window parameter, CSV emission, and theory/sim comparison.

A sweep walks a grid of (mode, timer, window, seed) points. Theory points
come from the analytic solvers; simulation points each run the event-driven
model once. Simulation rows are emitted per seed; consumers average over
seeds before picking an optimum. The sweep order is deterministic —
(mode, tout, m, seed) — so identical specs serialize to identical CSV bytes.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .errors import NoConvergedPointError, ParameterError
from .model import (
    MODE_ASYMMETRIC,
    MODE_SYMMETRIC,
    STATUS_CONVERGED,
    STATUS_SATURATED,
    AnalyticSolution,
    ModelInputs,
    SolverSettings,
    solve_no_timeout,
    solve_with_timeout,
)
from .sim import ScenarioConfig, run_simulation

MODE_THEORY = "theory"
MODE_SIM = "sim"

METRIC_GOOD = "gamma_good"
METRIC_RAW = "gamma_raw"

CSV_HEADER = "mode,m,tout_s,seed,rtt_s,p_timeout,gamma_raw,gamma_good,status"

STATUS_ERROR = "error"


@dataclass(frozen=True)
class SweepSpec:
    """Grid description; defaults reproduce the 512 kbps benchmark sweep."""

    scenario: ScenarioConfig
    m_values: tuple[int, ...] = tuple(range(10, 171, 10))
    tout_values: tuple[float, ...] = (2.0, 3.0, 4.0, math.inf)
    seeds: tuple[int, ...] = (1, 2, 3)
    modes: tuple[str, ...] = (MODE_THEORY, MODE_SIM)
    metric: str = METRIC_GOOD
    solver: SolverSettings = SolverSettings()

    def validate(self) -> None:
        self.scenario.validate()
        if not self.m_values:
            raise ParameterError("m_values must be nonempty")
        if any(b <= a for a, b in zip(self.m_values, self.m_values[1:])):
            raise ParameterError("m_values must be strictly increasing")
        if not self.tout_values:
            raise ParameterError("tout_values must be nonempty")
        if not self.seeds:
            raise ParameterError("seeds must be nonempty")
        bad = set(self.modes) - {MODE_THEORY, MODE_SIM}
        if bad or not self.modes:
            raise ParameterError(f"modes must be a nonempty subset of (theory, sim), got {self.modes}")
        if self.metric not in (METRIC_GOOD, METRIC_RAW):
            raise ParameterError(f"metric must be {METRIC_GOOD} or {METRIC_RAW}")


@dataclass(frozen=True)
class SweepRow:
    """One sweep point; saturated rows carry a status and empty metrics."""

    mode: str
    m: int
    tout_s: float
    seed: int
    rtt_s: float | None
    p_timeout: float | None
    gamma_raw: float | None
    gamma_good: float | None
    status: str


def model_inputs_for(scenario: ScenarioConfig, m: int, tout: float) -> ModelInputs:
    """Analytic counterpart of a scenario: mu = link bps / mean packet bits."""
    bits = scenario.mean_data_bytes * 8.0
    mu_up = scenario.uplink_bps / bits
    mu_down = scenario.downlink_bps / bits
    mode = MODE_SYMMETRIC if mu_down == mu_up else MODE_ASYMMETRIC
    return ModelInputs(
        mu_up=mu_up, mu_down=mu_down, tp=scenario.tp, tout=tout, m=m, mode=mode
    )


def _theory_row(spec: SweepSpec, m: int, tout: float) -> SweepRow:
    try:
        inputs = model_inputs_for(spec.scenario, m, tout)
        if math.isfinite(tout):
            sol = solve_with_timeout(inputs, spec.solver)
        else:
            sol = solve_no_timeout(inputs)
    except ParameterError:
        return SweepRow(MODE_THEORY, m, tout, 0, None, None, None, None, STATUS_ERROR)
    return SweepRow(
        MODE_THEORY, m, tout, 0,
        sol.rtt, sol.p_timeout, sol.gamma_raw, sol.gamma_good, sol.status,
    )


def _sim_row(cfg: ScenarioConfig) -> SweepRow:
    report = run_simulation(cfg)
    return SweepRow(
        MODE_SIM, cfg.threads_per_peer, cfg.tout, cfg.seed,
        report.rtt_mean, report.p_timeout_empirical,
        report.gamma_raw, report.gamma_good, STATUS_CONVERGED,
    )


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[SweepRow]:
    """Evaluate the whole grid; theory first, then per-seed simulation rows.

    Simulation rows are produced only for finite timers (the infinite-timer
    curve is a theory construct). Points are independent, so workers > 1
    fans the simulations out over processes; row order never depends on
    completion order.
    """
    spec.validate()
    rows: list[SweepRow] = []
    if MODE_THEORY in spec.modes:
        for tout in spec.tout_values:
            for m in spec.m_values:
                rows.append(_theory_row(spec, m, tout))
    if MODE_SIM in spec.modes:
        cfgs = [
            replace(spec.scenario, threads_per_peer=m, thread_overrides=None,
                    tout=tout, seed=seed)
            for tout in spec.tout_values
            if math.isfinite(tout)
            for m in spec.m_values
            for seed in spec.seeds
        ]
        if workers > 1 and len(cfgs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                rows.extend(pool.map(_sim_row, cfgs, chunksize=1))
        else:
            rows.extend(_sim_row(cfg) for cfg in cfgs)
    return rows


def _slice(rows: list[SweepRow], tout: float, mode: str) -> list[SweepRow]:
    return [r for r in rows if r.mode == mode and r.tout_s == tout]


def seed_averaged(rows: list[SweepRow]) -> dict[int, dict[str, float]]:
    """Average converged rows of one (mode, tout) slice over seeds, keyed by m."""
    groups: dict[int, list[SweepRow]] = {}
    for r in rows:
        if r.status == STATUS_CONVERGED:
            groups.setdefault(r.m, []).append(r)
    out = {}
    for m, grp in groups.items():
        out[m] = {
            "rtt_s": sum(r.rtt_s for r in grp) / len(grp),
            "p_timeout": sum(r.p_timeout for r in grp) / len(grp),
            "gamma_raw": sum(r.gamma_raw for r in grp) / len(grp),
            "gamma_good": sum(r.gamma_good for r in grp) / len(grp),
        }
    return out


def find_optimal_m(rows: list[SweepRow], tout: float, mode: str, metric: str = METRIC_GOOD) -> int:
    """The m maximizing the metric on a (tout, mode) slice; ties go low.

    Simulation rows are seed-averaged per m before the argmax.
    """
    if metric not in (METRIC_GOOD, METRIC_RAW):
        raise ParameterError(f"unknown metric {metric!r}")
    averaged = seed_averaged(_slice(rows, tout, mode))
    if not averaged:
        raise NoConvergedPointError(
            f"no converged rows for mode={mode} tout={tout}"
        )
    best_m, best_v = None, -math.inf
    for m in sorted(averaged):
        v = averaged[m][metric]
        if v > best_v:
            best_m, best_v = m, v
    return best_m


def _fmt(value: float | int | None) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    if math.isinf(value):
        return "inf"
    return f"{value:.6g}"


def emit_csv(rows: list[SweepRow], destination: str) -> None:
    """Write rows with the fixed header; byte-identical for identical input."""
    with open(destination, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in rows:
            fh.write(
                ",".join(
                    (
                        r.mode,
                        str(r.m),
                        _fmt(r.tout_s),
                        str(r.seed),
                        _fmt(r.rtt_s),
                        _fmt(r.p_timeout),
                        _fmt(r.gamma_raw),
                        _fmt(r.gamma_good),
                        r.status,
                    )
                )
                + "\n"
            )


def parse_csv(path: str) -> list[SweepRow]:
    """Read rows written by emit_csv; the header must match exactly."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER.split(","):
            raise ParameterError(f"unexpected CSV header in {path}: {header}")
        for rec in reader:
            if len(rec) != 9:
                raise ParameterError(f"malformed CSV row in {path}: {rec}")
            rows.append(
                SweepRow(
                    mode=rec[0],
                    m=int(rec[1]),
                    tout_s=float(rec[2]),
                    seed=int(rec[3]),
                    rtt_s=float(rec[4]) if rec[4] else None,
                    p_timeout=float(rec[5]) if rec[5] else None,
                    gamma_raw=float(rec[6]) if rec[6] else None,
                    gamma_good=float(rec[7]) if rec[7] else None,
                    status=rec[8],
                )
            )
    return rows


@dataclass(frozen=True)
class CompareTolerances:
    gamma_good: float = 0.08
    p_timeout: float = 0.08
    optimal_m: int = 20


def compare_report(rows: list[SweepRow], tol: CompareTolerances | None = None) -> str:
    ok, text = compare_check(rows, tol)
    return text


def compare_check(rows: list[SweepRow], tol: CompareTolerances | None = None) -> tuple[bool, str]:
    """Per-timer discrepancy summary between theory and simulation slices.

    Selection uses gamma_good; the gamma_raw optima are recorded alongside.
    Returns overall pass/fail against the tolerances plus the text report.
    """
    tol = tol if tol is not None else CompareTolerances()
    touts = sorted({r.tout_s for r in rows})
    lines = ["theory/simulation comparison", "============================"]
    all_ok = True
    comparable = False
    for tout in touts:
        lines.append(f"tout={_fmt(tout)}s:")
        theory = seed_averaged(_slice(rows, tout, MODE_THEORY))
        sim = seed_averaged(_slice(rows, tout, MODE_SIM))
        for name, present in (("theory", theory), ("sim", sim)):
            if not present:
                lines.append(f"  {name} slice: absent")
        for mode, data in ((MODE_THEORY, theory), (MODE_SIM, sim)):
            if data:
                for metric in (METRIC_GOOD, METRIC_RAW):
                    best = max(sorted(data), key=lambda m: (data[m][metric], -m))
                    note = "" if metric == METRIC_GOOD else " (recorded; selection uses gamma_good)"
                    lines.append(f"  optimal m [{mode}, {metric}]: {best}{note}")
        common = sorted(set(theory) & set(sim))
        if not common:
            continue
        comparable = True
        dg = {m: abs(sim[m]["gamma_good"] - theory[m]["gamma_good"]) for m in common}
        dp = {m: abs(sim[m]["p_timeout"] - theory[m]["p_timeout"]) for m in common}
        worst_g = max(common, key=lambda m: dg[m])
        worst_p = max(common, key=lambda m: dp[m])
        g_ok = dg[worst_g] <= tol.gamma_good
        p_ok = dp[worst_p] <= tol.p_timeout
        best_t = max(sorted(theory), key=lambda m: (theory[m][METRIC_GOOD], -m))
        best_s = max(sorted(sim), key=lambda m: (sim[m][METRIC_GOOD], -m))
        m_ok = abs(best_t - best_s) <= tol.optimal_m
        lines.append(f"  common converged m points: {len(common)}")
        lines.append(
            f"  |d gamma_good|: max {dg[worst_g]:.4f} (m={worst_g}), "
            f"mean {sum(dg.values()) / len(dg):.4f} "
            f"[tol {tol.gamma_good}] {'PASS' if g_ok else 'FAIL'}"
        )
        lines.append(
            f"  |d p_timeout|:  max {dp[worst_p]:.4f} (m={worst_p}), "
            f"mean {sum(dp.values()) / len(dp):.4f} "
            f"[tol {tol.p_timeout}] {'PASS' if p_ok else 'FAIL'}"
        )
        lines.append(
            f"  optimal m gap: theory={best_t} sim={best_s} "
            f"[tol {tol.optimal_m}] {'PASS' if m_ok else 'FAIL'}"
        )
        all_ok = all_ok and g_ok and p_ok and m_ok
    if not comparable:
        lines.append("no overlapping theory/sim points; nothing to check")
        all_ok = False
    lines.append(f"overall: {'PASS' if all_ok and comparable else 'FAIL'}")
    return all_ok and comparable, "\n".join(lines)


def benchmark_spec(
    modes: tuple[str, ...] = (MODE_THEORY, MODE_SIM),
    seeds: tuple[int, ...] = (1, 2, 3),
) -> SweepSpec:
    """The 512 kbps symmetric reference grid: m 10..170, timers 2/3/4/inf."""
    scenario = ScenarioConfig(n_peers=110, threads_per_peer=10)
    return SweepSpec(scenario=scenario, modes=modes, seeds=seeds)


def adsl_spec(modes: tuple[str, ...] = (MODE_THEORY,)) -> SweepSpec:
    """The asymmetric (ADSL) grid: 256 kbps up, 512 kbps down, 4 s timer."""
    scenario = ScenarioConfig(
        n_peers=110, threads_per_peer=5,
        uplink_bps=256_000.0, downlink_bps=512_000.0,
    )
    return SweepSpec(
        scenario=scenario,
        m_values=tuple(range(5, 101, 5)),
        tout_values=(4.0,),
        modes=modes,
    )
