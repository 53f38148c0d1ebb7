"""Single transferable vote tabulation with a full round log.

This is a simplified, fully documented STV rule set chosen for
determinism and testability, not a statutory implementation; the
differences from the Commonwealth Senate rules are listed in
docs/counting-rules.md.  In brief:

- Droop quota: floor(formal / (seats + 1)) + 1.
- Ballots counted along their maximal valid prefix (see ballots module).
- Surpluses distributed largest first by the inclusive Gregory method:
  every paper the elected candidate holds moves at transfer value
  surplus / (number of transferable papers); papers with no continuing
  next preference stay put and the surplus attributable to nothing
  transferable is set aside as exhausted value.
- Exclusions remove the lowest continuing candidate, one at a time; their
  papers move at the value they carried in.
- Ties (for exclusion, election order, and surplus order) break by
  earlier-round tallies, walking backwards; if tied in every round, the
  candidate listed earlier in the contest wins the tie.
- When continuing candidates = unfilled seats, all are elected
  (close-out), lowest tallies last.

Tallies are exact rationals throughout, so value is conserved to zero
loss every round; the round-log CSV renders them floored to integers per
the usual reporting convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .ballots import Contest, PreferenceSequence
from .errors import DomainError

CONTINUING = "continuing"
ELECTED = "elected"
EXCLUDED = "excluded"


@dataclass
class _Bundle:
    """Papers sharing one preference prefix and one carried value."""

    prefs: tuple[str, ...]
    position: int  # index into prefs of the candidate currently holding
    papers: int
    value: Fraction

    def next_continuing(self, status: dict[str, str]) -> int | None:
        for i in range(self.position + 1, len(self.prefs)):
            if status[self.prefs[i]] == CONTINUING:
                return i
        return None


@dataclass(frozen=True)
class RoundRecord:
    number: int
    action: str  # "first_preferences" | "elect" | "surplus" | "exclude"
    subject: str  # candidate acted on ("" for the initial allocation)
    detail: str
    tallies: dict[str, Fraction]
    exhausted: Fraction
    continuing_before: int
    seats_unfilled_before: int


@dataclass(frozen=True)
class CountState:
    contest: Contest
    quota: int
    total_ballots: int
    formal_ballots: int
    elected: tuple[str, ...]  # in order of election
    candidate_status: dict[str, str]
    tallies: dict[str, Fraction]  # final
    first_preferences: dict[str, int]
    exhausted: Fraction
    round_log: tuple[RoundRecord, ...]
    ballots: tuple[PreferenceSequence, ...]  # original input, for recounts

    @property
    def non_winners(self) -> list[str]:
        return [c for c in self.contest.candidates if c not in self.elected]


def droop_quota(formal: int, seats: int) -> int:
    return formal // (seats + 1) + 1


class _Count:
    def __init__(self, contest: Contest, ballots: list[PreferenceSequence]):
        self.contest = contest
        self.order = {c: i for i, c in enumerate(contest.candidates)}
        self.ballots = tuple(ballots)
        for sequence in ballots:
            unknown = set(sequence.rankings) - set(contest.candidates)
            if unknown:
                raise DomainError(
                    f"ballot ranks unknown candidates {sorted(unknown)}"
                )
        prefixes = [tuple(b.usable_prefix()) for b in ballots]
        self.formal = sum(1 for p in prefixes if p)
        self.quota = droop_quota(self.formal, contest.seats)
        self.status = {c: CONTINUING for c in contest.candidates}
        self.tallies = {c: Fraction(0) for c in contest.candidates}
        self.exhausted = Fraction(0)
        self.piles: dict[str, list[_Bundle]] = {c: [] for c in contest.candidates}
        self.elected: list[str] = []
        self.pending_surplus: list[str] = []
        self.log: list[RoundRecord] = []
        self.round_number = 0
        self.tally_history: list[dict[str, Fraction]] = []

        grouped: dict[tuple[str, ...], int] = {}
        for prefix in prefixes:
            if prefix:
                grouped[prefix] = grouped.get(prefix, 0) + 1
        for prefix, papers in sorted(grouped.items()):
            bundle = _Bundle(prefs=prefix, position=0, papers=papers, value=Fraction(1))
            self.piles[prefix[0]].append(bundle)
            self.tallies[prefix[0]] += papers
        self.first_preferences = {
            c: int(self.tallies[c]) for c in contest.candidates
        }
        self._record(
            "first_preferences", "", "initial allocation",
            continuing_before=len(contest.candidates),
            unfilled_before=contest.seats,
        )

    # ── bookkeeping ────────────────────────────────────────────────

    def _record(self, action: str, subject: str, detail: str, *,
                continuing_before: int, unfilled_before: int):
        self.log.append(
            RoundRecord(
                number=self.round_number,
                action=action,
                subject=subject,
                detail=detail,
                tallies=dict(self.tallies),
                exhausted=self.exhausted,
                continuing_before=continuing_before,
                seats_unfilled_before=unfilled_before,
            )
        )
        self.tally_history.append(dict(self.tallies))
        self.round_number += 1

    def _continuing(self) -> list[str]:
        return [c for c in self.contest.candidates if self.status[c] == CONTINUING]

    def _continuing_count(self) -> int:
        return sum(1 for c in self.status.values() if c == CONTINUING)

    def _breaks_tie_low(self, candidates: list[str]) -> str:
        """The candidate that LOSES the tie (to be excluded)."""
        tied = list(candidates)
        for past in reversed(self.tally_history):
            values = {c: past[c] for c in tied}
            low = min(values.values())
            tied = [c for c in tied if values[c] == low]
            if len(tied) == 1:
                return tied[0]
        return max(tied, key=lambda c: self.order[c])

    def _breaks_tie_high(self, candidates: list[str]) -> str:
        """The candidate that WINS the tie (elected/distributed first)."""
        tied = list(candidates)
        for past in reversed(self.tally_history):
            values = {c: past[c] for c in tied}
            high = max(values.values())
            tied = [c for c in tied if values[c] == high]
            if len(tied) == 1:
                return tied[0]
        return min(tied, key=lambda c: self.order[c])

    def _lowest_continuing(self) -> str:
        continuing = self._continuing()
        low = min(self.tallies[c] for c in continuing)
        tied = [c for c in continuing if self.tallies[c] == low]
        return tied[0] if len(tied) == 1 else self._breaks_tie_low(tied)

    def _sort_descending(self, candidates: list[str]) -> list[str]:
        remaining = list(candidates)
        ordered = []
        while remaining:
            high = max(self.tallies[c] for c in remaining)
            tied = [c for c in remaining if self.tallies[c] == high]
            pick = tied[0] if len(tied) == 1 else self._breaks_tie_high(tied)
            ordered.append(pick)
            remaining.remove(pick)
        return ordered

    # ── round actions ──────────────────────────────────────────────

    def _elect(self, candidate: str, reason: str):
        continuing_before = self._continuing_count()
        unfilled_before = self.contest.seats - len(self.elected)
        self.status[candidate] = ELECTED
        self.elected.append(candidate)
        if self.tallies[candidate] > self.quota:
            self.pending_surplus.append(candidate)
        self._record(
            "elect", candidate, f"{candidate} elected ({reason})",
            continuing_before=continuing_before, unfilled_before=unfilled_before,
        )

    def _elect_reachers(self) -> bool:
        """Elect continuing candidates at or above quota; True if any."""
        any_elected = False
        while len(self.elected) < self.contest.seats:
            reachers = [
                c for c in self._continuing() if self.tallies[c] >= self.quota
            ]
            if not reachers:
                break
            first = self._sort_descending(reachers)[0]
            self._elect(first, "reached quota")
            any_elected = True
        return any_elected

    def _distribute_largest_surplus(self):
        surpluses = {
            c: self.tallies[c] - self.quota for c in self.pending_surplus
        }
        high = max(surpluses.values())
        tied = [c for c in self.pending_surplus if surpluses[c] == high]
        source = tied[0] if len(tied) == 1 else self._breaks_tie_high(tied)
        self.pending_surplus.remove(source)
        surplus = self.tallies[source] - self.quota

        bundles = self.piles[source]
        moves: list[tuple[_Bundle, int]] = []
        transferable_papers = 0
        for bundle in bundles:
            nxt = bundle.next_continuing(self.status)
            if nxt is not None:
                moves.append((bundle, nxt))
                transferable_papers += bundle.papers

        continuing_before = self._continuing_count()
        unfilled_before = self.contest.seats - len(self.elected)
        if transferable_papers == 0:
            # Nothing can move; the surplus value sits with no continuing
            # destination and is set aside as exhausted.
            self.exhausted += surplus
            self.tallies[source] = Fraction(self.quota)
            self._record(
                "surplus", source,
                f"{source} surplus {surplus} exhausted (no transferable papers)",
                continuing_before=continuing_before, unfilled_before=unfilled_before,
            )
            return

        transfer_value = surplus / transferable_papers
        kept = [b for b in bundles if all(b is not m for m, _ in moves)]
        self.piles[source] = kept
        for bundle, nxt in moves:
            target = bundle.prefs[nxt]
            moved = _Bundle(
                prefs=bundle.prefs,
                position=nxt,
                papers=bundle.papers,
                value=transfer_value,
            )
            self.piles[target].append(moved)
            self.tallies[target] += transfer_value * bundle.papers
        self.tallies[source] = Fraction(self.quota)
        self._record(
            "surplus", source,
            f"{source} surplus {surplus} to {transferable_papers} papers "
            f"at value {transfer_value}",
            continuing_before=continuing_before, unfilled_before=unfilled_before,
        )

    def _exclude(self, candidate: str):
        continuing_before = self._continuing_count()
        unfilled_before = self.contest.seats - len(self.elected)
        self.status[candidate] = EXCLUDED
        bundles = self.piles[candidate]
        self.piles[candidate] = []
        moved_value = Fraction(0)
        exhausted_value = Fraction(0)
        for bundle in bundles:
            nxt = bundle.next_continuing(self.status)
            amount = bundle.value * bundle.papers
            if nxt is None:
                exhausted_value += amount
                continue
            target = bundle.prefs[nxt]
            self.piles[target].append(
                _Bundle(
                    prefs=bundle.prefs,
                    position=nxt,
                    papers=bundle.papers,
                    value=bundle.value,
                )
            )
            self.tallies[target] += amount
            moved_value += amount
        self.exhausted += exhausted_value
        self.tallies[candidate] = Fraction(0)
        self._record(
            "exclude", candidate,
            f"{candidate} excluded; {moved_value} transferred, "
            f"{exhausted_value} exhausted",
            continuing_before=continuing_before, unfilled_before=unfilled_before,
        )

    def run(self) -> CountState:
        while True:
            if self._elect_reachers():
                if len(self.elected) >= self.contest.seats:
                    break
                continue
            if len(self.elected) >= self.contest.seats:
                break
            continuing = self._continuing()
            unfilled = self.contest.seats - len(self.elected)
            if len(continuing) <= unfilled:
                for candidate in self._sort_descending(continuing):
                    self._elect(candidate, "close-out")
                break
            if self.pending_surplus:
                self._distribute_largest_surplus()
                continue
            self._exclude(self._lowest_continuing())

        return CountState(
            contest=self.contest,
            quota=self.quota,
            total_ballots=len(self.ballots),
            formal_ballots=self.formal,
            elected=tuple(self.elected),
            candidate_status=dict(self.status),
            tallies=dict(self.tallies),
            first_preferences=dict(self.first_preferences),
            exhausted=self.exhausted,
            round_log=tuple(self.log),
            ballots=self.ballots,
        )


def count(contest: Contest, ballots: list[PreferenceSequence]) -> CountState:
    """Run the count and return the final state with its full round log."""
    return _Count(contest, list(ballots)).run()


def round_log_rows(state: CountState) -> list[dict]:
    """Round log as CSV-ready rows: one row per candidate per round.

    Tallies are rendered floored to whole votes (display convention); the
    exact rational values stay on the CountState.
    """
    rows = []
    for record in state.round_log:
        for candidate in state.contest.candidates:
            rows.append(
                {
                    "round": record.number,
                    "action": record.action,
                    "detail": record.detail,
                    "candidate": candidate,
                    "votes": int(record.tallies[candidate]),
                    "exhausted": int(record.exhausted),
                }
            )
    return rows
