"""Apparent-margin bounds: feasible vote changes that flip the outcome.

Exact STV margins are infeasible to compute in general, but two cheap
constructions give sound upper bounds:

- last-round margin: when the final exclusion leaves exactly as many
  continuing candidates as unfilled seats, shifting whole ballots from
  the weakest surviving winner d to the excluded candidate c reverses
  that exclusion;
- quota raise: rewriting other ballots' first preferences until a
  non-winning candidate holds a full quota of first preferences elects
  that candidate outright.

Every estimate emitted here is *verified*: the described ballot edit is
applied and the contest recounted, and the estimate is only reported if
the elected set actually changes.  The minimum over all verified
estimates is the apparent margin — an upper bound on the true margin,
never a proof of minimality.

Ballot edits are modelled as whole-ballot rewrites to a single first
preference for the raised candidate.  Both constructions therefore touch
first preferences; when first preferences are frozen (they are hand
counted in public and hard to alter undetectably), no bound is available
from these constructions and the sentinel result says so.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .ballots import PreferenceSequence
from .errors import DomainError
from .stv import CountState, count

LAST_ROUND = "last_round"
QUOTA_RAISE = "quota_raise"
NO_FEASIBLE_CHANGE = "no_feasible_change"


@dataclass(frozen=True)
class MarginEstimate:
    kind: str
    vote_changes: int
    pct: float
    effect: str
    applicable: bool = True
    verified: bool = False
    already_tied: bool = False
    note: str = ""
    # The concrete edit that was verified: rewrite these ballot indices to
    # a single first preference for the beneficiary.  Empty for sentinels.
    victim_indices: tuple[int, ...] = ()
    beneficiary: str = ""


def _not_applicable(kind: str, note: str) -> MarginEstimate:
    return MarginEstimate(
        kind=kind, vote_changes=0, pct=0.0, effect="", applicable=False, note=note
    )


def _pct(changes: int, state: CountState) -> float:
    return changes / state.formal_ballots if state.formal_ballots else 0.0


def _rewrite_ballots(
    ballots: tuple[PreferenceSequence, ...],
    victim_indices: list[int],
    beneficiary: str,
) -> list[PreferenceSequence]:
    bullet = {beneficiary: 1}
    edited = list(ballots)
    for i in victim_indices:
        edited[i] = replace(edited[i], rankings=bullet)
    return edited


def _recount_flips(state: CountState, edited: list[PreferenceSequence]) -> bool:
    new_state = count(state.contest, edited)
    return set(new_state.elected) != set(state.elected)


def apply_estimate(
    state: CountState, estimate: MarginEstimate
) -> list[PreferenceSequence]:
    """The edited ballot list a verified estimate describes.

    Recounting this list must change the elected set; anyone can check.
    """
    if not estimate.verified:
        raise DomainError("estimate was not verified; there is no edit to apply")
    return _rewrite_ballots(
        state.ballots, list(estimate.victim_indices), estimate.beneficiary
    )


def _final_exclusion(state: CountState):
    """The exclusion that left continuing == unfilled seats, if any."""
    for record in reversed(state.round_log):
        if record.action == "exclude":
            if record.continuing_before == record.seats_unfilled_before + 1:
                return record
            return None
    return None


def last_round_margin(state: CountState) -> MarginEstimate:
    """Smallest whole-ballot shift d -> c reversing the final exclusion.

    c is the last excluded candidate, d the lowest-tallied winner still
    continuing at that moment.  x solves tally(c) + x beats tally(d) - x
    under the count's tie-break; the shift rewrites x ballots whose first
    preference is d into first preferences for c and recounts.
    """
    record = _final_exclusion(state)
    if record is None:
        return _not_applicable(
            LAST_ROUND, "final round is not an exclusion down to the seat count"
        )
    excluded_candidate = record.subject

    # Tallies at the moment of that exclusion come from the preceding
    # round record (the exclusion record already has the papers moved).
    if record.number == 0:
        return _not_applicable(LAST_ROUND, "no tallies before the final exclusion")
    before = state.round_log[record.number - 1].tallies

    # d: the weakest of the winners that were still continuing when the
    # exclusion happened, i.e. those elected in later rounds.
    later_winners = [
        r.subject
        for r in state.round_log
        if r.action == "elect" and r.number > record.number
    ]
    if not later_winners:
        return _not_applicable(
            LAST_ROUND, "no candidate was elected after the final exclusion"
        )
    order = {c: i for i, c in enumerate(state.contest.candidates)}
    d = min(later_winners, key=lambda c: (before[c], -order[c]))

    tally_c = before[excluded_candidate]
    tally_d = before[d]
    gap = tally_d - tally_c
    c_wins_ties = order[excluded_candidate] < order[d]
    if c_wins_ties:
        x = math.ceil(gap / 2)
    else:
        x = math.floor(gap / 2) + 1
    x = int(x)

    if gap == 0 and c_wins_ties:
        return MarginEstimate(
            kind=LAST_ROUND,
            vote_changes=0,
            pct=0.0,
            effect=f"{excluded_candidate} and {d} already tied",
            applicable=True,
            verified=False,
            already_tied=True,
            note="outcome already balanced on the tie-break",
        )

    d_first = [
        i
        for i, ballot in enumerate(state.ballots)
        if (prefix := ballot.usable_prefix()) and prefix[0] == d
    ]
    if len(d_first) < x:
        return _not_applicable(
            LAST_ROUND,
            f"{d} holds only {len(d_first)} first-preference ballots; "
            f"{x} whole-ballot shifts are not available",
        )
    victims = tuple(d_first[:x])
    edited = _rewrite_ballots(state.ballots, list(victims), excluded_candidate)
    if not _recount_flips(state, edited):
        return _not_applicable(
            LAST_ROUND,
            f"shifting {x} ballots {d} -> {excluded_candidate} did not change "
            f"the elected set on recount",
        )
    return MarginEstimate(
        kind=LAST_ROUND,
        vote_changes=x,
        pct=_pct(x, state),
        effect=f"+{excluded_candidate}; -{d}",
        verified=True,
        victim_indices=victims,
        beneficiary=excluded_candidate,
    )


def quota_raise_bound(state: CountState, candidate: str) -> MarginEstimate:
    """Vote changes to hand ``candidate`` a full quota of first preferences."""
    if candidate not in state.contest.candidates:
        raise DomainError(f"unknown candidate {candidate!r}")
    if candidate in state.elected:
        raise DomainError(f"{candidate} already won; quota raise is undefined")
    first_prefs = state.first_preferences.get(candidate, 0)
    needed = state.quota - first_prefs
    if needed <= 0:
        return _not_applicable(
            QUOTA_RAISE,
            f"{candidate} already holds a quota of first preferences",
        )
    victims = [
        i
        for i, ballot in enumerate(state.ballots)
        if (prefix := ballot.usable_prefix()) and prefix[0] != candidate
    ]
    if len(victims) < needed:
        return _not_applicable(
            QUOTA_RAISE,
            f"only {len(victims)} other formal ballots exist; cannot raise "
            f"{candidate} by {needed}",
        )
    chosen = tuple(victims[:needed])
    edited = _rewrite_ballots(state.ballots, list(chosen), candidate)
    if not _recount_flips(state, edited):
        return _not_applicable(
            QUOTA_RAISE,
            f"raising {candidate} to a quota did not change the elected set",
        )
    displaced = [c for c in state.elected if c not in count(state.contest, edited).elected]
    effect = f"+{candidate}" + (f"; -{displaced[0]}" if displaced else "")
    return MarginEstimate(
        kind=QUOTA_RAISE,
        vote_changes=needed,
        pct=_pct(needed, state),
        effect=effect,
        verified=True,
        victim_indices=chosen,
        beneficiary=candidate,
    )


def apparent_margin(
    state: CountState, allow_first_preference_changes: bool = True
) -> MarginEstimate:
    """Minimum verified vote-change bound over all constructions.

    An upper bound on the true margin: some smaller change may exist that
    these constructions cannot see.  With first preferences frozen, no
    construction here applies and the sentinel records that no feasible
    bound was found.
    """
    if not allow_first_preference_changes:
        return MarginEstimate(
            kind=NO_FEASIBLE_CHANGE,
            vote_changes=state.total_ballots,
            pct=1.0,
            effect="",
            applicable=False,
            note="all constructions here edit first preferences; none is "
            "available with first preferences frozen",
        )
    candidates: list[MarginEstimate] = []
    last = last_round_margin(state)
    if last.applicable and last.verified:
        candidates.append(last)
    for candidate in state.non_winners:
        estimate = quota_raise_bound(state, candidate)
        if estimate.applicable and estimate.verified:
            candidates.append(estimate)
    if not candidates:
        return MarginEstimate(
            kind=NO_FEASIBLE_CHANGE,
            vote_changes=state.total_ballots,
            pct=1.0,
            effect="",
            applicable=False,
            note="no verified feasible change found (degenerate contest)",
        )
    return min(candidates, key=lambda e: (e.vote_changes, e.kind))
