"""Shared independent oracles for the test suite.

These deliberately avoid the library's own code paths: the root finder is a
plain bisection on the defining equation and the distribution oracle is a
numeric quadrature of the gamma density.
"""

import math

from scipy import integrate


def bisect_no_timeout_rtt(mu: float, tp: float, m: float, k: int) -> float:
    """Bisection on E = tp + k/(mu - m/E), bracketing the physical root."""

    def f(e: float) -> float:
        return tp + k / (mu - m / e) - e

    lo = max(tp, m / mu) + 1e-12
    hi = lo + 1.0
    while f(hi) > 0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return 0.5 * (lo + hi)


def quad_erlang_cdf(t: float, shape: int, scale: float) -> float:
    """Integrate the gamma density with integer shape from 0 to t."""
    if t <= 0:
        return 0.0

    def density(u: float) -> float:
        return u ** (shape - 1) * math.exp(-u / scale) / (
            scale**shape * math.factorial(shape - 1)
        )

    value, _ = integrate.quad(density, 0.0, t, epsabs=1e-12, epsrel=1e-12, limit=200)
    return value
