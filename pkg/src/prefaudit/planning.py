"""Selection probabilities and per-contest sample-size targets.

The legislative floor is a total sample size (5,000 ballots nationally, or
1,000 when a single contest runs alone).  Because the attained sample under
Bernoulli selection is Binomial(n, p), the selection probability has to be
set high enough that the floor is exceeded with near certainty; this module
solves for the smallest such p and allocates per-contest targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError, InfeasibleError
from .numerics import binom_tail_geq, bisect_increasing

MULTI_CONTEST_FLOOR = 5000
SINGLE_CONTEST_FLOOR = 1000
DEFAULT_ASSURANCE = 0.999

# Table-style reports carry 9 decimal places.
REPORT_DECIMALS = 9


@dataclass(frozen=True)
class SamplingPlan:
    """Selection parameters for one contest.

    ``n`` is the ballot population the probability was solved against
    (enrolment or expected turnout, caller's choice), ``t`` the target
    sample size, and ``p`` the smallest selection probability giving at
    least ``assurance`` probability of drawing ``t`` or more ballots.
    """

    contest_id: str
    n: int
    t: int
    assurance: float = DEFAULT_ASSURANCE
    p: float = field(default=0.0)

    @property
    def expected_sample(self) -> float:
        return self.n * self.p


def min_selection_probability(
    n: int, t: int, assurance: float = DEFAULT_ASSURANCE
) -> float:
    """Smallest p with Pr(Binomial(n, p) >= t) >= assurance.

    Solved by bisection on p against the upper-tail identity
    Pr(S >= t) = I_p(t, n - t + 1), to absolute tolerance 1e-12.
    """
    if n < 1:
        raise DomainError(f"population must be positive, got n={n}")
    if t > n:
        raise InfeasibleError(f"target {t} exceeds population {n}")
    if not 0.0 < assurance < 1.0:
        raise DomainError(f"assurance must lie strictly in (0, 1), got {assurance}")
    if t <= 0:
        return 0.0

    lo = (t / n) * 1e-3
    hi = min(1.0, 10.0 * t / n)
    while binom_tail_geq(n, t, hi) < assurance and hi < 1.0:
        hi = min(1.0, hi * 2.0)
    if binom_tail_geq(n, t, lo) >= assurance:
        lo = 0.0
    return bisect_increasing(
        lambda p: binom_tail_geq(n, t, p), assurance, lo, hi, tol=1e-12
    )


def allocate_targets(
    contests,
    overall_floor: int,
    strategy: str = "equal_split",
    weights: dict[str, float] | None = None,
    assurance: float = DEFAULT_ASSURANCE,
    populations: dict[str, int] | None = None,
) -> list[SamplingPlan]:
    """Split an overall sample floor into per-contest plans.

    ``contests`` is a sequence of Contest values (anything with
    ``contest_id`` and ``enrolled_voters``).  Strategies:

    - ``equal_split``: ceil(floor / #contests) each.
    - ``single_contest``: the whole floor on the sole contest.
    - ``custom``: proportional to ``weights``, rounded up per contest so
      the targets still sum to at least the floor.

    ``populations`` overrides enrolment with expected turnout per contest.
    """
    contests = list(contests)
    if not contests:
        raise DomainError("cannot allocate targets over an empty contest list")
    if overall_floor < 1:
        raise DomainError(f"overall floor must be >= 1, got {overall_floor}")

    if strategy == "equal_split":
        per = math.ceil(overall_floor / len(contests))
        targets = {c.contest_id: per for c in contests}
    elif strategy == "single_contest":
        if len(contests) != 1:
            raise DomainError("single_contest strategy requires exactly one contest")
        targets = {contests[0].contest_id: overall_floor}
    elif strategy == "custom":
        if not weights:
            raise DomainError("custom strategy requires weights")
        missing = [c.contest_id for c in contests if c.contest_id not in weights]
        if missing:
            raise DomainError(f"weights missing for contests: {missing}")
        total_w = sum(weights[c.contest_id] for c in contests)
        if total_w <= 0:
            raise DomainError("weights must sum to a positive value")
        targets = {
            c.contest_id: math.ceil(overall_floor * weights[c.contest_id] / total_w)
            for c in contests
        }
    else:
        raise DomainError(f"unknown allocation strategy {strategy!r}")

    if sum(targets.values()) < overall_floor:
        raise InfeasibleError(
            f"allocated targets sum to {sum(targets.values())} < floor {overall_floor}"
        )

    plans = []
    for contest in contests:
        n = (populations or {}).get(contest.contest_id, contest.enrolled_voters)
        t = targets[contest.contest_id]
        p = min_selection_probability(n, t, assurance)
        plans.append(
            SamplingPlan(
                contest_id=contest.contest_id, n=n, t=t, assurance=assurance, p=p
            )
        )
    return plans


def top_up_draw(plan: SamplingPlan, achieved: int) -> int:
    """Extra ballots to draw uniformly when the Bernoulli pass fell short."""
    if achieved < 0:
        raise DomainError(f"achieved sample cannot be negative, got {achieved}")
    return max(0, plan.t - achieved)


def plan_report_rows(plans: list[SamplingPlan]) -> list[dict]:
    """Rows for the plan CSV, probabilities at report precision."""
    return [
        {
            "contest_id": plan.contest_id,
            "n": plan.n,
            "target": plan.t,
            "assurance": plan.assurance,
            "p": f"{plan.p:.{REPORT_DECIMALS}f}",
            "expected_sample": f"{plan.expected_sample:.1f}",
        }
        for plan in plans
    ]
