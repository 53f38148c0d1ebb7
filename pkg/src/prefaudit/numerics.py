"""Regularized incomplete beta function and binomial tail helpers.

This is the single numerical kernel behind both the sampling-probability
solver and the exact confidence intervals.  It is deliberately
self-contained (stdlib only) so that scrutineers can audit the arithmetic
without chasing a numerics dependency: the continued-fraction evaluation
below is the classic Lentz form, and ``math.lgamma`` supplies the log-beta
normalisation.

Accuracy: relative error around 1e-14 on the regularized incomplete beta
for the parameter ranges used here (shape parameters up to a few million),
cross-checked in the test suite against exact term-by-term binomial
summation.
"""

from __future__ import annotations

import math

from .errors import DomainError

_MAX_CF_ITERATIONS = 2000
_CF_EPS = 1e-16
_CF_TINY = 1e-300


def log_beta(a: float, b: float) -> float:
    """log B(a, b) via lgamma."""
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz).

    Converges quickly when x < (a + 1) / (a + b + 2); callers are expected
    to route through :func:`betainc`, which applies the symmetry transform
    when x is on the far side.
    """
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_CF_ITERATIONS + 1):
        m2 = 2 * m
        # even step
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        # odd step
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(
        f"incomplete beta continued fraction failed to converge "
        f"(a={a!r}, b={b!r}, x={x!r})"
    )


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b).

    a, b > 0 and 0 <= x <= 1.
    """
    if a <= 0.0 or b <= 0.0:
        raise DomainError(f"beta shape parameters must be positive, got a={a}, b={b}")
    if x < 0.0 or x > 1.0:
        raise DomainError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (
        a * math.log(x) + b * math.log1p(-x) - log_beta(a, b)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def betainc_inv(a: float, b: float, q: float, *, tol: float = 1e-14) -> float:
    """Inverse of the regularized incomplete beta: x with I_x(a, b) = q.

    Plain bisection on x.  I_x is strictly increasing in x, so bisection is
    slow but unconditionally safe; the interval solvers built on top of
    this are not in any hot path.
    """
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"quantile must lie in [0, 1], got {q}")
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if betainc(a, b, mid) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def binom_tail_geq(n: int, t: int, p: float) -> float:
    """Pr(S >= t) for S ~ Binomial(n, p).

    Uses the identity Pr(S >= t) = I_p(t, n - t + 1), which stays stable
    for n in the millions where direct summation would not.
    """
    if n < 0:
        raise DomainError(f"n must be nonnegative, got {n}")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    if t <= 0:
        return 1.0
    if t > n:
        return 0.0
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    return betainc(float(t), float(n - t + 1), p)


def bisect_increasing(
    fn,
    target: float,
    lo: float,
    hi: float,
    *,
    tol: float = 1e-12,
) -> float:
    """Smallest x in [lo, hi] with fn(x) >= target, for nondecreasing fn.

    Returns the upper end of the final bracket so the guarantee
    fn(result) >= target survives the tolerance cut-off.  Raises
    DomainError if even fn(hi) falls short.
    """
    if fn(hi) < target:
        raise DomainError(f"target {target} unreachable on [{lo}, {hi}]")
    if fn(lo) >= target:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fn(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi
