"""Queueing model of the windowed request/response swarm transport.

Every peer runs `m` stop-wait request threads against the other peers, so
each access-link queue sees data packets arrive at rate m/rtt while serving
them at rate mu packets/second. Treating each queue as M/M/1 couples the
round-trip time to itself:

    rtt = tp + k / (mu - m/rtt)                      (no timeout)

with k = 4 queue stages for symmetric links and k = 2 when the downlink is
fast enough to never queue (asymmetric mode). With a finite timer the sum
of the k stage delays is Erlang(k, x) with x = (rtt - tp)/k, a packet is
late with probability P = 1 - ErlangCDF(tout - tp), and late packets burn
link capacity without being delivered, shrinking the usable rate:

    rtt = tp + k / ((1 - P) * (mu - m/rtt))          (finite timeout)

`solve_no_timeout` takes the closed-form root of the quadratic; the larger
root is the physical one. `solve_with_timeout` scans candidate rtt bottom-up
on a fixed grid and locks onto the first point where the right-hand side
falls to the diagonal, refining the crossing by bisection so the returned
fixed point satisfies the equation to within the solver tolerance. When no
crossing exists below the search ceiling the offered load exceeds what the
discounted link can carry and the solution is reported as saturated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ParameterError
from .stats import _erlang_cdf

MODE_SYMMETRIC = "symmetric"
MODE_ASYMMETRIC = "asymmetric"

STATUS_CONVERGED = "converged"
STATUS_SATURATED = "saturated"

_BISECTION_XTOL = 1e-12


@dataclass(frozen=True)
class ModelInputs:
    """One analytic operating point.

    mu_up/mu_down are service rates in packets/second (link bps over mean
    packet bits). mu_down is informational: symmetric mode requires it equal
    to mu_up (or omitted), asymmetric mode assumes it large enough that the
    downlink never queues, so only mu_up enters the equations.
    """

    mu_up: float
    m: int
    tp: float = 0.6
    tout: float = math.inf
    mode: str = MODE_SYMMETRIC
    mu_down: float | None = None

    def __post_init__(self):
        if not self.mu_up > 0:
            raise ParameterError(f"mu_up must be > 0, got {self.mu_up}")
        if self.tp < 0:
            raise ParameterError(f"tp must be >= 0, got {self.tp}")
        if self.m < 0:
            raise ParameterError(f"m must be >= 0, got {self.m}")
        if self.mode not in (MODE_SYMMETRIC, MODE_ASYMMETRIC):
            raise ParameterError(f"unknown mode {self.mode!r}")
        if math.isfinite(self.tout) and not self.tout > self.tp:
            # With tout <= tp every packet is late by construction.
            raise ParameterError(
                f"finite tout must exceed tp, got tout={self.tout} tp={self.tp}"
            )
        if self.mu_down is not None:
            if self.mode == MODE_SYMMETRIC and self.mu_down != self.mu_up:
                raise ParameterError("symmetric mode requires mu_down == mu_up")
            if self.mode == MODE_ASYMMETRIC and self.mu_down < self.mu_up:
                raise ParameterError("asymmetric mode assumes mu_down >= mu_up")

    @property
    def stages(self) -> int:
        """Queue stages on a round trip: 4 symmetric, 2 asymmetric."""
        return 4 if self.mode == MODE_SYMMETRIC else 2


@dataclass(frozen=True)
class SolverSettings:
    """Grid parameters for the bottom-up fixed-point scan."""

    step: float = 0.001
    tolerance: float = 0.001
    rtt_max: float = 60.0

    def __post_init__(self):
        if not self.step > 0:
            raise ParameterError(f"step must be > 0, got {self.step}")
        if self.tolerance < 0:
            raise ParameterError(f"tolerance must be >= 0, got {self.tolerance}")


@dataclass(frozen=True)
class AnalyticSolution:
    """Fixed-point outputs; metric fields are None when saturated."""

    status: str
    rtt: float | None = None
    x: float | None = None
    p_timeout: float | None = None
    gamma_raw: float | None = None
    gamma_good: float | None = None

    @property
    def converged(self) -> bool:
        return self.status == STATUS_CONVERGED


def normalized_throughput(m: float, rtt: float, mu: float) -> float:
    """Packet arrival rate m/rtt over the service rate mu."""
    if not rtt > 0:
        raise ParameterError(f"rtt must be > 0, got {rtt}")
    if not mu > 0:
        raise ParameterError(f"mu must be > 0, got {mu}")
    return (m / rtt) / mu


def _converged(inputs: ModelInputs, rtt: float, p: float) -> AnalyticSolution:
    graw = normalized_throughput(inputs.m, rtt, inputs.mu_up)
    return AnalyticSolution(
        status=STATUS_CONVERGED,
        rtt=rtt,
        x=(rtt - inputs.tp) / inputs.stages,
        p_timeout=p,
        gamma_raw=graw,
        gamma_good=graw * (1.0 - p),
    )


def solve_no_timeout(inputs: ModelInputs) -> AnalyticSolution:
    """Closed-form solution of rtt = tp + k/(mu - m/rtt) for an infinite timer.

    Clearing denominators gives mu*E^2 - (m + mu*tp + k)*E + m*tp = 0; the
    larger root always exceeds tp and is returned. m = 0 degenerates to the
    empty-system value tp + k/mu, which the same formula produces exactly.
    """
    if math.isfinite(inputs.tout):
        raise ParameterError("solve_no_timeout requires an infinite tout")
    mu, tp, m, k = inputs.mu_up, inputs.tp, inputs.m, inputs.stages
    b = m + mu * tp + k
    rtt = (b + math.sqrt(b * b - 4.0 * mu * m * tp)) / (2.0 * mu)
    return _converged(inputs, rtt, 0.0)


def _residual(rtt: float, mu: float, tp: float, tout: float, m: float, k: int) -> float | None:
    """rhs(rtt) - rtt for the timeout fixed point; None where infeasible."""
    cap = mu - m / rtt
    if cap <= 0.0:
        return None
    p = 1.0 - _erlang_cdf(tout - tp, k, (rtt - tp) / k)
    if p >= 1.0:
        return None
    return tp + k / ((1.0 - p) * cap) - rtt


def solve_with_timeout(inputs: ModelInputs, settings: SolverSettings | None = None) -> AnalyticSolution:
    """Bottom-up grid scan for the smallest timeout fixed point.

    Candidates run from tp + step upward; points where mu - m/rtt <= 0 or
    P = 1 are infeasible and skipped. The residual rhs - rtt starts positive
    on every feasible stretch; the scan stops at the first candidate where
    it has fallen to within the tolerance and, if it overshot below zero,
    bisects the bracketing step so the result satisfies the fixed point to
    within the tolerance regardless of how steep the crossing is. No
    crossing below rtt_max means the operating point is saturated.
    """
    if not math.isfinite(inputs.tout):
        raise ParameterError("solve_with_timeout requires a finite tout")
    s = settings if settings is not None else SolverSettings()
    if not s.rtt_max > inputs.tp:
        raise ParameterError(f"rtt_max must exceed tp, got {s.rtt_max}")
    mu, tp, tout, m, k = inputs.mu_up, inputs.tp, inputs.tout, float(inputs.m), inputs.stages

    prev_rtt = None
    steps = int(math.floor((s.rtt_max - tp) / s.step + 1e-9))
    for i in range(1, steps + 1):
        rtt = tp + i * s.step
        g = _residual(rtt, mu, tp, tout, m, k)
        if g is None:
            prev_rtt = None
            continue
        if g <= s.tolerance:
            if g < 0.0:
                rtt = _refine(rtt, prev_rtt, mu, tp, tout, m, k)
            p = 1.0 - _erlang_cdf(tout - tp, k, (rtt - tp) / k)
            return _converged(inputs, rtt, p)
        prev_rtt = rtt
    return AnalyticSolution(status=STATUS_SATURATED)


def _refine(hi: float, prev_rtt: float | None, mu: float, tp: float, tout: float, m: float, k: int) -> float:
    """Bisect the sign change in [lo, hi]; lo is the last positive-residual point."""
    if prev_rtt is not None:
        lo = prev_rtt
    else:
        # Crossing sits inside the first feasible step; the residual blows up
        # to +inf as the capacity term approaches zero from above.
        lo = max(tp, m / mu) * (1.0 + 1e-12) + 1e-12
        glo = _residual(lo, mu, tp, tout, m, k)
        if glo is None or glo <= 0.0:
            return hi
    while hi - lo > _BISECTION_XTOL:
        mid = 0.5 * (lo + hi)
        gm = _residual(mid, mu, tp, tout, m, k)
        if gm is None or gm > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


def theory_curve(
    template: ModelInputs,
    m_values: list[int] | tuple[int, ...],
    settings: SolverSettings | None = None,
) -> list[tuple[int, AnalyticSolution]]:
    """Solve one operating point per m, preserving order; never aborts midway."""
    if len(m_values) == 0:
        raise ParameterError("m_values must be nonempty")
    if any(b <= a for a, b in zip(m_values, m_values[1:])):
        raise ParameterError("m_values must be strictly increasing")
    finite = math.isfinite(template.tout)
    out = []
    for m in m_values:
        point = replace(template, m=m)
        sol = solve_with_timeout(point, settings) if finite else solve_no_timeout(point)
        out.append((m, sol))
    return out
