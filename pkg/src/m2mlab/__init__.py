"""Desk-scale lab for windowed multi-peer swarm transport.

Three layers: an analytic queueing model of the request window / timeout
trade-off (`model`), a deterministic discrete-event simulator of the same
protocol (`sim`), and a sweep harness joining the two into CSV tables and
comparison reports (`harness`).
"""

from .errors import NoConvergedPointError, ParameterError
from .harness import (
    CompareTolerances,
    SweepRow,
    SweepSpec,
    adsl_spec,
    benchmark_spec,
    compare_check,
    compare_report,
    emit_csv,
    find_optimal_m,
    model_inputs_for,
    parse_csv,
    run_sweep,
    seed_averaged,
)
from .model import (
    AnalyticSolution,
    ModelInputs,
    SolverSettings,
    normalized_throughput,
    solve_no_timeout,
    solve_with_timeout,
    theory_curve,
)
from .sim import (
    Event,
    Packet,
    ScenarioConfig,
    SimReport,
    Simulation,
    ThreadState,
    on_data_arrival,
    run_simulation,
    select_destination,
    service_time,
)
from .stats import ErlangParams, RngStream, derive_stream, erlang_cdf, sample_exponential

__version__ = "0.1.0"

__all__ = [
    "AnalyticSolution",
    "CompareTolerances",
    "ErlangParams",
    "Event",
    "ModelInputs",
    "NoConvergedPointError",
    "Packet",
    "ParameterError",
    "RngStream",
    "ScenarioConfig",
    "SimReport",
    "SweepRow",
    "SweepSpec",
    "Simulation",
    "SolverSettings",
    "ThreadState",
    "adsl_spec",
    "benchmark_spec",
    "compare_check",
    "compare_report",
    "derive_stream",
    "emit_csv",
    "erlang_cdf",
    "find_optimal_m",
    "model_inputs_for",
    "normalized_throughput",
    "on_data_arrival",
    "parse_csv",
    "run_simulation",
    "run_sweep",
    "sample_exponential",
    "seed_averaged",
    "select_destination",
    "service_time",
    "solve_no_timeout",
    "solve_with_timeout",
    "theory_curve",
]
