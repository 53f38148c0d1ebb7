"""Shared fixtures and independent oracles for the test suite.

The binomial-tail oracles here deliberately avoid the package's
incomplete-beta kernel: exact rational summation for small n, log-domain
summation for large n.  Statistical assertions use fixed seeds so the
suite is deterministic.
"""

from __future__ import annotations

import math
from fractions import Fraction

import pytest

from prefaudit.ballots import Contest, PreferenceSequence


def binom_tail_exact(n: int, t: int, p) -> Fraction:
    """Pr(S >= t) as an exact rational (small n only)."""
    p = Fraction(p)
    q = 1 - p
    if t <= 0:
        return Fraction(1)
    if t > n:
        return Fraction(0)
    total = Fraction(0)
    for k in range(t, n + 1):
        total += math.comb(n, k) * p**k * q ** (n - k)
    return total


def binom_tail_logsum(n: int, t: int, p: float) -> float:
    """Pr(S >= t) by direct log-domain term summation (any n)."""
    if t <= 0:
        return 1.0
    if t > n:
        return 0.0
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return 1.0

    def log_term(k: int) -> float:
        return (
            math.lgamma(n + 1)
            - math.lgamma(k + 1)
            - math.lgamma(n - k + 1)
            + k * math.log(p)
            + (n - k) * math.log1p(-p)
        )

    # Sum whichever tail has fewer terms.
    if n - t + 1 <= t:
        ks = range(t, n + 1)
        complement = False
    else:
        ks = range(0, t)
        complement = True
    logs = [log_term(k) for k in ks]
    peak = max(logs)
    total = math.exp(peak) * sum(math.exp(lt - peak) for lt in logs)
    return 1.0 - total if complement else total


def binom_pmf(n: int, k: int, p: float) -> float:
    return math.exp(
        math.lgamma(n + 1)
        - math.lgamma(k + 1)
        - math.lgamma(n - k + 1)
        + k * math.log(p)
        + (n - k) * math.log1p(-p)
    )


def exact_binomial_band(n: int, p: float, tail_prob: float) -> tuple[int, int]:
    """Central band [lo, hi] with each tail at most tail_prob."""
    cdf = 0.0
    lo = 0
    for k in range(n + 1):
        cdf += binom_pmf(n, k, p)
        if cdf > tail_prob:
            lo = k
            break
    cdf = 0.0
    hi = n
    for k in range(n, -1, -1):
        cdf += binom_pmf(n, k, p)
        if cdf > tail_prob:
            hi = k
            break
    return lo, hi


@pytest.fixture
def small_contest() -> Contest:
    return Contest(
        contest_id="TEST",
        jurisdiction_name="Testland",
        candidates=("ALPHA", "BRAVO", "CHARLIE", "DELTA"),
        seats=2,
        enrolled_voters=1000,
    )


def sequence(**ranks: int) -> PreferenceSequence:
    return PreferenceSequence(rankings=dict(ranks))


class TickingClock:
    """Deterministic ISO-8601 clock advancing one second per call."""

    def __init__(self, start: str = "2026-07-01T00:00:00"):
        self.counter = 0

    def __call__(self) -> str:
        self.counter += 1
        return f"2026-07-01T{self.counter // 3600:02d}:{(self.counter // 60) % 60:02d}:{self.counter % 60:02d}.000000Z"
