"""Error-rate estimation with exact confidence intervals.

The headline statistic is the fraction of ballots with at least one rank
discrepancy; the companion estimate is the average number of rank
discrepancies per ballot.  Intervals for the former are exact
Clopper–Pearson (inverted binomial tail tests); a two-round audit gets
per-stage intervals at Bonferroni-adjusted levels so the combined
coverage still meets the overall level.  Intervals for the latter are
nonparametric bootstrap percentile intervals.

Sampling here is without replacement, but no finite-population correction
is applied: at audit sampling fractions the binomial treatment is
conservative, and it is what the worked numbers in the methodology use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, PoolingError
from .numerics import betainc_inv
from .sampling import Seed, stream_for

DEFAULT_LEVEL = 0.95
DEFAULT_BOOTSTRAP_RESAMPLES = 10_000


@dataclass(frozen=True)
class ErrorSample:
    """Counts from one audit stage.

    ``total_rank_discrepancies`` may exceed ``ballots_with_error`` (one
    ballot can carry many rank errors) but must be zero exactly when no
    ballot has an error.  ``per_ballot_counts`` retains the discrepancy
    count of each inspected ballot when available; the bootstrap interval
    needs it.
    """

    ballots_inspected: int
    ballots_with_error: int
    total_rank_discrepancies: int
    stage: int = 1
    per_ballot_counts: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.ballots_inspected < 0:
            raise DomainError("ballots_inspected cannot be negative")
        if not 0 <= self.ballots_with_error <= self.ballots_inspected:
            raise DomainError(
                f"ballots_with_error {self.ballots_with_error} outside "
                f"[0, {self.ballots_inspected}]"
            )
        if (self.total_rank_discrepancies == 0) != (self.ballots_with_error == 0):
            raise DomainError(
                "total_rank_discrepancies must be zero exactly when "
                "ballots_with_error is zero"
            )
        if self.total_rank_discrepancies < self.ballots_with_error:
            raise DomainError(
                "every ballot with an error contributes at least one rank "
                "discrepancy"
            )
        if self.stage not in (1, 2):
            raise DomainError(f"stage must be 1 or 2, got {self.stage}")
        if self.per_ballot_counts is not None:
            counts = self.per_ballot_counts
            if len(counts) != self.ballots_inspected:
                raise DomainError("per-ballot counts do not match ballots_inspected")
            if sum(counts) != self.total_rank_discrepancies:
                raise DomainError("per-ballot counts do not sum to the total")
            if sum(1 for c in counts if c > 0) != self.ballots_with_error:
                raise DomainError("per-ballot counts disagree with ballots_with_error")


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float
    method: str  # "clopper_pearson" | "bonferroni_two_stage"

    def __post_init__(self):
        if not 0.0 <= self.lower <= self.upper <= 1.0:
            raise DomainError(
                f"interval endpoints out of order or range: "
                f"({self.lower}, {self.upper})"
            )


def clopper_pearson(errors: int, n: int, level: float = DEFAULT_LEVEL) -> ConfidenceInterval:
    """Exact binomial interval for an error count of ``errors`` out of ``n``.

    lower = BetaInv(alpha/2; k, n-k+1), zero at k = 0;
    upper = BetaInv(1-alpha/2; k+1, n-k), one at k = n.
    """
    if n < 1:
        raise DomainError("cannot form an interval from an empty sample")
    if not 0 <= errors <= n:
        raise DomainError(f"errors {errors} outside [0, {n}]")
    if not 0.0 < level < 1.0:
        raise DomainError(f"confidence level must lie strictly in (0, 1), got {level}")
    alpha = 1.0 - level
    lower = 0.0 if errors == 0 else betainc_inv(errors, n - errors + 1, alpha / 2.0)
    upper = 1.0 if errors == n else betainc_inv(errors + 1, n - errors, 1.0 - alpha / 2.0)
    return ConfidenceInterval(lower=lower, upper=upper, level=level, method="clopper_pearson")


def two_stage_interval(
    stage1: ErrorSample, stage2: ErrorSample, overall_level: float = DEFAULT_LEVEL
) -> ConfidenceInterval:
    """Bonferroni-adjusted exact interval over two disjoint audit stages.

    Each stage is entitled to an exact interval at level
    1 - (1 - overall)/2; the combined interval is Clopper–Pearson on the
    pooled counts at that same adjusted level, so the procedure's overall
    coverage is at least ``overall_level`` however the second stage came
    about.
    """
    if stage1.stage == stage2.stage:
        raise PoolingError(
            f"stages must be distinct samples, both labeled stage {stage1.stage}"
        )
    if not 0.0 < overall_level < 1.0:
        raise DomainError(f"confidence level must lie in (0, 1), got {overall_level}")
    adjusted = 1.0 - (1.0 - overall_level) / 2.0
    pooled_n = stage1.ballots_inspected + stage2.ballots_inspected
    pooled_k = stage1.ballots_with_error + stage2.ballots_with_error
    if pooled_n < 1:
        raise DomainError("pooled sample is empty")
    base = clopper_pearson(pooled_k, pooled_n, adjusted)
    return ConfidenceInterval(
        lower=base.lower, upper=base.upper, level=overall_level,
        method="bonferroni_two_stage",
    )


def stage_levels(overall_level: float) -> float:
    """Per-stage level under the two-stage Bonferroni split."""
    return 1.0 - (1.0 - overall_level) / 2.0


def scale_to_counts(ci: ConfidenceInterval, cast_ballots: int) -> tuple[int, int]:
    """Rescale a rate interval to a ballot-count interval.

    Both endpoints are rounded up: the margin comparison treats the upper
    endpoint conservatively, and the worked numbers round the lower
    endpoint the same way.
    """
    if cast_ballots < 1:
        raise DomainError(f"cast ballots must be positive, got {cast_ballots}")
    return (
        math.ceil(ci.lower * cast_ballots),
        math.ceil(ci.upper * cast_ballots),
    )


@dataclass(frozen=True)
class MeanErrorsEstimate:
    point: float
    interval: tuple[float, float] | None
    resamples: int

    @property
    def has_interval(self) -> bool:
        return self.interval is not None


def mean_errors_per_ballot(
    sample: ErrorSample,
    *,
    seed: Seed | None = None,
    resamples: int = DEFAULT_BOOTSTRAP_RESAMPLES,
    level: float = DEFAULT_LEVEL,
) -> MeanErrorsEstimate:
    """Average rank discrepancies per ballot, with a bootstrap interval.

    The point estimate is total discrepancies / ballots inspected.  When
    per-ballot counts were retained, a nonparametric percentile interval
    is attached from ``resamples`` seeded bootstrap resamples; without
    them only the point estimate is returned.  The resampling stream is
    the deterministic counter-mode generator, so the interval is
    reproducible from the seed transcript.
    """
    if sample.ballots_inspected < 1:
        raise DomainError("cannot estimate a mean from zero inspected ballots")
    point = sample.total_rank_discrepancies / sample.ballots_inspected
    counts = sample.per_ballot_counts
    if counts is None:
        return MeanErrorsEstimate(point=point, interval=None, resamples=0)
    if resamples < 1:
        raise DomainError("resample count must be positive")
    if seed is None:
        seed = Seed(raw_entropy="", canonical_seed=b"\x00" * 32)
    n = len(counts)
    if all(c == 0 for c in counts):
        return MeanErrorsEstimate(point=0.0, interval=(0.0, 0.0), resamples=resamples)
    stream = stream_for(seed, "bootstrap:mean_errors")
    lanes = stream.raw_lanes(resamples * n)
    means = []
    for _ in range(resamples):
        total = 0
        for _ in range(n):
            total += counts[(next(lanes) * n) >> 64]
        means.append(total / n)
    means.sort()
    alpha = 1.0 - level
    lo_rank = max(1, math.ceil(alpha / 2.0 * resamples))
    hi_rank = min(resamples, math.ceil((1.0 - alpha / 2.0) * resamples))
    interval = (means[lo_rank - 1], means[hi_rank - 1])
    return MeanErrorsEstimate(point=point, interval=interval, resamples=resamples)
