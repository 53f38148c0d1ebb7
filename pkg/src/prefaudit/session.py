"""Event-sourced audit session: commitment → seed → selection → readings → conclusion.

Every state change is an event appended to the hash-chained log; the
in-memory state is a pure fold over those events, so replaying a log from
scratch reproduces tallies and conclusions exactly.  Command methods
validate against the current state, append the event, then apply it —
validation never mutates, application never validates.

Ordering discipline enforced here:

- turnout for a polling place is locked before any of its ballots are
  ingested;
- a sampling seed is registered strictly after the batch it covers was
  committed (otherwise the selection was predictable);
- readings are accepted only for ballots the sampler selected;
- a conflicting resubmission must be flagged as a correction; the latest
  correction wins for tallies and everything stays in the log.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass
from typing import Callable

from . import margins as margins_mod
from . import sampling, stats
from .ballots import Batch, Contest, PreferenceSequence, contest_from_json
from .errors import (
    ConflictError,
    DomainError,
    OrderingViolation,
    SelectionError,
    StateError,
)
from .events import Event, EventLog
from .planning import min_selection_probability
from .stv import count as stv_count

SETUP = "setup"
BATCH_PROCESSING = "batch_processing"
ANALYSIS = "analysis"
SECOND_PASS = "second_pass"
CONCLUDED = "concluded"

LOW_ENOUGH = "low_enough"
TOO_HIGH = "too_high"
INCONCLUSIVE = "inconclusive"

RECOMMENDATIONS = {
    LOW_ENOUGH: (
        "Conclude the audit and report that the observed errors are unlikely "
        "to have altered the outcome. Caveat for the report: the apparent "
        "margin is an upper bound derived from feasible changes and may "
        "overstate how safe the contest is."
    ),
    TOO_HIGH: (
        "Do not certify on this evidence; further investigation is required. "
        "Checklist: assess the nature of the recorded errors (systematic vs "
        "incidental, which candidates they touch); investigate potential "
        "sources of error, such as a low-quality scanner or a compromised "
        "digitisation machine; consider re-examining all paper ballots if "
        "the cause cannot be isolated."
    ),
    INCONCLUSIVE: (
        "Evidence is insufficient either way: plan a second sampling pass, "
        "retrieving from storage so that every cast ballot in the contest "
        "can be drawn with equal probability, and evaluate with the "
        "two-stage interval."
    ),
}


def classify_scenario(ci_counts: tuple[int, int], margin_votes: int) -> str:
    """Exactly one scenario holds; equality with the margin is inconclusive."""
    lower, upper = ci_counts
    if upper < margin_votes:
        return LOW_ENOUGH
    if lower > margin_votes:
        return TOO_HIGH
    return INCONCLUSIVE


@dataclass(frozen=True)
class Discrepancy:
    batch_id: str
    ballot_index: int
    digitised: dict[str, int]
    human_read: dict[str, int]
    rank_diffs: tuple[tuple[str, int | None, int | None], ...]
    entered_by: str
    at: str


@dataclass(frozen=True)
class AuditConclusion:
    scenario: str
    ci_lower: float
    ci_upper: float
    ci_counts: tuple[int, int]
    margin_votes: int
    margin_kind: str
    cast_ballots: int
    level: float
    method: str
    recommendation: str


@dataclass
class _Reading:
    batch_id: str
    ballot_index: int
    human: dict[str, int]
    digitised: dict[str, int]
    rank_diffs: list
    operator: str
    at: str
    correction: bool
    stage: int


def _utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


class AuditSession:
    """One contest's audit, driven by commands, persisted as events."""

    def __init__(
        self,
        contest: Contest,
        *,
        session_id: str = "session",
        level: float = stats.DEFAULT_LEVEL,
        assurance: float = 0.999,
        log: EventLog | None = None,
        clock: Callable[[], str] = _utc_now,
    ):
        self.log = log if log is not None else EventLog()
        self.clock = clock
        self._batch_data: dict[str, Batch] = {}
        self._reset_state()
        if len(self.log) == 0:
            self._append(
                "session_created",
                {
                    "session_id": session_id,
                    "contest": {
                        "contest_id": contest.contest_id,
                        "jurisdiction": contest.jurisdiction_name,
                        "candidates": list(contest.candidates),
                        "seats": contest.seats,
                        "enrolled_voters": contest.enrolled_voters,
                    },
                    "level": level,
                    "assurance": assurance,
                },
            )
        else:
            for event in self.log:
                self._apply(event)

    # ── fold machinery ─────────────────────────────────────────────

    def _reset_state(self):
        self.session_id = ""
        self.contest: Contest | None = None
        self.level = stats.DEFAULT_LEVEL
        self.assurance = 0.999
        self.phase = SETUP
        self.turnout: dict[str, int] = {}
        self.batch_meta: dict[str, dict] = {}  # id -> {commitment, size, places, at}
        self.batch_order: list[str] = []
        self.seed_events: list[dict] = []  # {scope, seed_digest, at}
        self.selections: dict[str, list[int]] = {}  # batch_id -> indices
        self.selection_params: dict[str, float] = {}  # batch_id -> p
        self.second_pass_refs: list[tuple[str, int]] = []
        self.second_pass_target: int | None = None
        self.readings: dict[tuple[str, int], list[_Reading]] = {}
        self.margin: dict | None = None
        self.conclusions: list[AuditConclusion] = []

    def _append(self, type_: str, payload: dict) -> Event:
        event = self.log.append(type_, payload, self.clock())
        self._apply(event)
        return event

    def _apply(self, event: Event):
        handler = getattr(self, f"_apply_{event.type}", None)
        if handler is None:
            raise DomainError(f"unknown event type {event.type!r} in log")
        handler(event)

    # ── event appliers (pure state transitions) ────────────────────

    def _apply_session_created(self, event: Event):
        p = event.payload
        self.session_id = p["session_id"]
        self.contest = contest_from_json(p["contest"])
        self.level = p["level"]
        self.assurance = p["assurance"]
        self.phase = SETUP

    def _apply_turnout_recorded(self, event: Event):
        self.turnout[event.payload["place"]] = event.payload["count"]

    def _apply_batch_committed(self, event: Event):
        p = event.payload
        self.batch_meta[p["batch_id"]] = {
            "commitment": p["commitment"],
            "size": p["size"],
            "places": dict(p["places"]),
            "at": event.at,
        }
        self.batch_order.append(p["batch_id"])
        self.phase = BATCH_PROCESSING

    def _apply_seed_registered(self, event: Event):
        self.seed_events.append(
            {
                "scope": event.payload["scope"],
                "seed_digest": event.payload["seed_digest"],
                "transcript": event.payload["transcript"],
                "at": event.at,
            }
        )

    def _apply_selections_drawn(self, event: Event):
        p = event.payload
        self.selections[p["batch_id"]] = list(p["indices"])
        self.selection_params[p["batch_id"]] = p["p"]

    def _apply_reading_submitted(self, event: Event):
        p = event.payload
        ref = (p["batch_id"], p["ballot_index"])
        reading = _Reading(
            batch_id=p["batch_id"],
            ballot_index=p["ballot_index"],
            human={c: r for c, r in p["human"].items()},
            digitised={c: r for c, r in p["digitised"].items()},
            rank_diffs=[tuple(d) for d in p["rank_diffs"]],
            operator=p["operator"],
            at=event.at,
            correction=p["correction"],
            stage=p["stage"],
        )
        self.readings.setdefault(ref, []).append(reading)

    def _apply_phase_advanced(self, event: Event):
        self.phase = event.payload["phase"]

    def _apply_margin_set(self, event: Event):
        self.margin = dict(event.payload)

    def _apply_second_pass_planned(self, event: Event):
        p = event.payload
        self.second_pass_target = p["target"]
        self.phase = SECOND_PASS

    def _apply_second_pass_drawn(self, event: Event):
        refs = [tuple(r) for r in event.payload["refs"]]
        self.second_pass_refs.extend(refs)

    def _apply_concluded(self, event: Event):
        p = event.payload
        self.conclusions.append(
            AuditConclusion(
                scenario=p["scenario"],
                ci_lower=p["ci_lower"],
                ci_upper=p["ci_upper"],
                ci_counts=(p["ci_counts"][0], p["ci_counts"][1]),
                margin_votes=p["margin_votes"],
                margin_kind=p["margin_kind"],
                cast_ballots=p["cast_ballots"],
                level=p["level"],
                method=p["method"],
                recommendation=p["recommendation"],
            )
        )
        if p["scenario"] != INCONCLUSIVE:
            self.phase = CONCLUDED

    # ── commands ───────────────────────────────────────────────────

    def record_turnout(self, polling_place: str, count: int):
        if count < 0:
            raise DomainError("turnout cannot be negative")
        if polling_place in self.turnout:
            raise ConflictError(
                f"turnout for {polling_place!r} already recorded; records lock "
                f"on first write"
            )
        ingested = self._ingested_by_place().get(polling_place, 0)
        if ingested:
            raise OrderingViolation(
                f"{ingested} ballots from {polling_place!r} were already "
                f"ingested; turnout must be committed first"
            )
        self._append("turnout_recorded", {"place": polling_place, "count": count})

    def commit_batch(self, batch: Batch, contest: Contest | None = None):
        contest = contest or self.contest
        if self.phase not in (SETUP, BATCH_PROCESSING):
            raise StateError(f"cannot commit batches in phase {self.phase}")
        if batch.batch_id in self.batch_meta:
            raise ConflictError(f"batch {batch.batch_id!r} already committed")
        if not batch.is_committed:
            raise DomainError("batch must carry its commitment digest; "
                              "call ballots.commit_batch first")
        places: dict[str, int] = {}
        for ballot in batch.ballots:
            places[ballot.origin_label] = places.get(ballot.origin_label, 0) + 1
        self._batch_data[batch.batch_id] = batch
        self._append(
            "batch_committed",
            {
                "batch_id": batch.batch_id,
                "commitment": batch.commitment,
                "size": batch.size,
                "places": places,
            },
        )

    def register_seed(self, transcript: str, scope: str, p: float | None = None):
        """Register a ceremony seed and draw the selections it implies.

        ``scope`` is a committed batch id (stage 1) or ``second_pass``.
        The seed must postdate the batch commitment strictly.
        """
        seed = sampling.seed_from_ceremony(transcript)
        if scope == "second_pass":
            return self._draw_second_pass(seed, transcript)
        if scope not in self.batch_meta:
            raise DomainError(f"seed scope {scope!r} is not a committed batch")
        committed_at = self.batch_meta[scope]["at"]
        now = self.clock()
        if not committed_at < now:
            raise OrderingViolation(
                f"seed for batch {scope!r} registered at {now} but the batch "
                f"was committed at {committed_at}; the seed must come strictly "
                f"after commitment"
            )
        if scope in self.selections:
            raise ConflictError(f"selections for batch {scope!r} already drawn")
        if p is None:
            raise DomainError("selection probability p is required")
        self._append(
            "seed_registered",
            {"scope": scope, "transcript": transcript, "seed_digest": seed.hex_digest},
        )
        stream = sampling.stream_for(seed, scope)
        indices = sampling.geometric_skip(stream, p, self.batch_meta[scope]["size"])
        self._append(
            "selections_drawn",
            {"batch_id": scope, "p": p, "indices": indices,
             "seed_digest": seed.hex_digest},
        )
        return indices

    def _draw_second_pass(self, seed: sampling.Seed, transcript: str):
        if self.phase != SECOND_PASS or self.second_pass_target is None:
            raise StateError("no second pass has been planned")
        population = self._global_population()
        already = {
            ref for ref in self._stage1_refs()
        }
        exclude = {
            i for i, ref in enumerate(population) if ref in already
        }
        self._append(
            "seed_registered",
            {"scope": "second_pass", "transcript": transcript,
             "seed_digest": seed.hex_digest},
        )
        stream = sampling.stream_for(seed, "second_pass")
        chosen = sampling.uniform_draw(
            stream, len(population), self.second_pass_target, exclude=exclude
        )
        refs = [population[i] for i in chosen]
        self._append("second_pass_drawn", {"refs": [list(r) for r in refs]})
        return refs

    def _global_population(self) -> list[tuple[str, int]]:
        refs = []
        for batch_id in self.batch_order:
            for i in range(self.batch_meta[batch_id]["size"]):
                refs.append((batch_id, i))
        return refs

    def _stage1_refs(self) -> set[tuple[str, int]]:
        return {
            (batch_id, i)
            for batch_id, indices in self.selections.items()
            for i in indices
        }

    def _selected(self, batch_id: str, ballot_index: int) -> bool:
        if ballot_index in self.selections.get(batch_id, ()):
            return True
        return (batch_id, ballot_index) in self.second_pass_refs

    def _stage_of(self, batch_id: str, ballot_index: int) -> int:
        return 2 if (batch_id, ballot_index) in self.second_pass_refs else 1

    def submit_reading(
        self,
        batch_id: str,
        ballot_index: int,
        human: PreferenceSequence,
        operator: str,
        *,
        correction: bool = False,
    ) -> Discrepancy | None:
        """Record a human reading; returns the discrepancy if any.

        Identical resubmission is idempotent (no new event).  A reading
        that contradicts an existing one requires ``correction=True`` and
        supersedes it for tallies while remaining in the log.
        """
        if self.phase not in (BATCH_PROCESSING, SECOND_PASS):
            raise StateError(f"readings are not accepted in phase {self.phase}")
        if batch_id not in self.batch_meta:
            raise DomainError(f"unknown batch {batch_id!r}")
        if not self._selected(batch_id, ballot_index):
            raise SelectionError(
                f"ballot {batch_id}[{ballot_index}] was not selected by the "
                f"sampler; readings of unselected ballots are refused"
            )
        digitised = self._digitised_rankings(batch_id, ballot_index)
        ref = (batch_id, ballot_index)
        existing = self.readings.get(ref, [])
        human_map = dict(human.rankings)
        if existing:
            current = existing[-1]
            if current.human == human_map:
                return self._discrepancy_from(current)
            if not correction:
                raise ConflictError(
                    f"ballot {batch_id}[{ballot_index}] already has a different "
                    f"reading; resubmit with correction=True to supersede it"
                )
        diffs = PreferenceSequence(digitised).rank_differences(
            PreferenceSequence(human_map, source="human_read")
        )
        self._append(
            "reading_submitted",
            {
                "batch_id": batch_id,
                "ballot_index": ballot_index,
                "operator": operator,
                "human": human_map,
                "digitised": digitised,
                "rank_diffs": [list(d) for d in diffs],
                "correction": bool(existing),
                "stage": self._stage_of(batch_id, ballot_index),
            },
        )
        return self._discrepancy_from(self.readings[ref][-1])

    def _digitised_rankings(self, batch_id: str, ballot_index: int) -> dict[str, int]:
        batch = self._batch_data.get(batch_id)
        if batch is not None:
            if not 0 <= ballot_index < batch.size:
                raise DomainError(
                    f"ballot index {ballot_index} outside batch of {batch.size}"
                )
            return dict(batch.ballots[ballot_index].preferences.rankings)
        # Replayed session without batch files: the digitised side lives in
        # the reading events themselves.
        ref = (batch_id, ballot_index)
        if ref in self.readings:
            return dict(self.readings[ref][-1].digitised)
        raise DomainError(
            f"no ballot data available for {batch_id!r}; attach the batch or "
            f"replay a log that already contains this reading"
        )

    def _discrepancy_from(self, reading: _Reading) -> Discrepancy | None:
        if not reading.rank_diffs:
            return None
        return Discrepancy(
            batch_id=reading.batch_id,
            ballot_index=reading.ballot_index,
            digitised=dict(reading.digitised),
            human_read=dict(reading.human),
            rank_diffs=tuple(tuple(d) for d in reading.rank_diffs),
            entered_by=reading.operator,
            at=reading.at,
        )

    # ── derived statistics ─────────────────────────────────────────

    def effective_readings(self) -> dict[tuple[str, int], _Reading]:
        return {ref: entries[-1] for ref, entries in self.readings.items()}

    def discrepancies(self) -> list[Discrepancy]:
        out = []
        for ref in sorted(self.readings):
            d = self._discrepancy_from(self.readings[ref][-1])
            if d is not None:
                out.append(d)
        return out

    def error_sample(self, stage: int | None = None) -> stats.ErrorSample:
        chosen = [
            r
            for r in self.effective_readings().values()
            if stage is None or r.stage == stage
        ]
        counts = tuple(len(r.rank_diffs) for r in chosen)
        return stats.ErrorSample(
            ballots_inspected=len(chosen),
            ballots_with_error=sum(1 for c in counts if c),
            total_rank_discrepancies=sum(counts),
            stage=stage or 1,
            per_ballot_counts=counts,
        )

    def has_second_stage_readings(self) -> bool:
        return any(r.stage == 2 for r in self.effective_readings().values())

    def confidence_interval(self, level: float | None = None) -> stats.ConfidenceInterval:
        level = level if level is not None else self.level
        if self.has_second_stage_readings():
            return stats.two_stage_interval(
                self.error_sample(stage=1), self.error_sample(stage=2), level
            )
        sample = self.error_sample()
        return stats.clopper_pearson(
            sample.ballots_with_error, sample.ballots_inspected, level
        )

    def _ingested_by_place(self) -> dict[str, int]:
        totals: dict[str, int] = {}
        for meta in self.batch_meta.values():
            for place, count in meta["places"].items():
                totals[place] = totals.get(place, 0) + count
        return totals

    def reconcile(self) -> dict:
        """Turnout vs ingestion report with severity levels, never raises."""
        ingested = self._ingested_by_place()
        places = []
        for place in sorted(set(self.turnout) | set(ingested)):
            expected = self.turnout.get(place)
            got = ingested.get(place, 0)
            if expected is None:
                status, severity = "unrecorded_turnout", "warning"
            elif got == expected:
                status, severity = "ok", "info"
            elif got < expected:
                status, severity = f"missing_{expected - got}", "warning"
            else:
                status, severity = f"excess_{got - expected}", "error"
            places.append(
                {"place": place, "recorded": expected, "ingested": got,
                 "status": status, "severity": severity}
            )
        unsampled = [b for b in self.batch_order if b not in self.selections]
        duplicate_refs = []
        seen: dict[tuple[str, int], str] = {}
        for batch_id in self.batch_order:
            batch = self._batch_data.get(batch_id)
            if batch is None:
                continue
            for ballot in batch.ballots:
                key = (ballot.origin_label, ballot.ballot_index)
                if key in seen and ballot.origin_label:
                    duplicate_refs.append(
                        {"place": key[0], "ballot_index": key[1],
                         "batches": [seen[key], batch_id]}
                    )
                else:
                    seen[key] = batch_id
        clean = (
            all(p["status"] == "ok" for p in places)
            and not unsampled
            and not duplicate_refs
        )
        return {
            "places": places,
            "batches_never_sampled": unsampled,
            "duplicate_ballot_refs": duplicate_refs,
            "clean": clean,
        }

    # ── margins and conclusion ─────────────────────────────────────

    def set_margin(
        self,
        vote_changes: int,
        kind: str = "external",
        effect: str = "",
        source: str = "external",
    ):
        self._append(
            "margin_set",
            {"kind": kind, "vote_changes": vote_changes, "effect": effect,
             "source": source},
        )

    def compute_margin(self) -> dict:
        """Count the committed digitised preferences and bound the margin."""
        if not self._batch_data:
            raise DomainError("no batch data attached; supply a margin instead")
        ballots = [
            ballot.preferences
            for batch_id in self.batch_order
            for ballot in self._batch_data[batch_id].ballots
        ]
        state = stv_count(self.contest, ballots)
        estimate = margins_mod.apparent_margin(state)
        self.set_margin(
            vote_changes=estimate.vote_changes,
            kind=estimate.kind,
            effect=estimate.effect,
            source="stv_count",
        )
        return self.margin

    def begin_analysis(self):
        if self.phase != BATCH_PROCESSING:
            raise StateError(f"cannot begin analysis from phase {self.phase}")
        self._append("phase_advanced", {"phase": ANALYSIS})

    def conclude(
        self,
        ci: stats.ConfidenceInterval | None = None,
        margin_votes: int | None = None,
        cast_ballots: int | None = None,
    ) -> AuditConclusion:
        """Classify the audit per the outcome trichotomy and log it."""
        if self.phase not in (ANALYSIS, SECOND_PASS):
            raise StateError(
                f"conclude requires analysis or second_pass phase, not {self.phase}"
            )
        if margin_votes is None:
            if self.margin is None:
                raise DomainError(
                    "no apparent margin available: supply one or call "
                    "compute_margin first"
                )
            margin_votes = self.margin["vote_changes"]
        margin_kind = self.margin["kind"] if self.margin else "external"
        if cast_ballots is None:
            cast_ballots = sum(self.turnout.values()) or sum(
                meta["size"] for meta in self.batch_meta.values()
            )
        if cast_ballots < 1:
            raise DomainError("cast ballot count unavailable; record turnout")
        if ci is None:
            ci = self.confidence_interval()
        ci_counts = stats.scale_to_counts(ci, cast_ballots)
        scenario = classify_scenario(ci_counts, margin_votes)
        conclusion = AuditConclusion(
            scenario=scenario,
            ci_lower=ci.lower,
            ci_upper=ci.upper,
            ci_counts=ci_counts,
            margin_votes=margin_votes,
            margin_kind=margin_kind,
            cast_ballots=cast_ballots,
            level=ci.level,
            method=ci.method,
            recommendation=RECOMMENDATIONS[scenario],
        )
        self._append(
            "concluded",
            {
                "scenario": conclusion.scenario,
                "ci_lower": conclusion.ci_lower,
                "ci_upper": conclusion.ci_upper,
                "ci_counts": list(conclusion.ci_counts),
                "margin_votes": conclusion.margin_votes,
                "margin_kind": conclusion.margin_kind,
                "cast_ballots": conclusion.cast_ballots,
                "level": conclusion.level,
                "method": conclusion.method,
                "recommendation": conclusion.recommendation,
            },
        )
        return conclusion

    def escalate_second_pass(self, new_target: int):
        """Plan stage 2 after an inconclusive stage-1 conclusion."""
        if not self.conclusions or self.conclusions[-1].scenario != INCONCLUSIVE:
            raise StateError(
                "second pass is only available after an inconclusive conclusion"
            )
        if self.phase == CONCLUDED:
            raise StateError("session already concluded")
        if new_target < 1:
            raise DomainError("second-pass target must be positive")
        population = sum(meta["size"] for meta in self.batch_meta.values())
        p = min_selection_probability(
            max(population, new_target), new_target, self.assurance
        )
        self._append(
            "second_pass_planned",
            {"target": new_target, "p": p, "population": population},
        )
        return {"target": new_target, "p": p, "population": population}

    # ── replay & integrity ─────────────────────────────────────────

    @classmethod
    def replay(
        cls,
        events: list[Event],
        batches: dict[str, Batch] | None = None,
        clock: Callable[[], str] = _utc_now,
    ) -> "AuditSession":
        """Rebuild a session purely from its event log."""
        from .events import verify_chain

        verify_chain(events)
        log = EventLog()
        log.events = list(events)
        session = cls.__new__(cls)
        session.log = log
        session.clock = clock
        session._batch_data = dict(batches or {})
        session._reset_state()
        for event in events:
            session._apply(event)
        session.verify_invariants()
        return session

    def verify_invariants(self):
        """Assertions every well-formed session history satisfies."""
        for seed_event in self.seed_events:
            scope = seed_event["scope"]
            if scope == "second_pass":
                continue
            committed_at = self.batch_meta[scope]["at"]
            if not committed_at < seed_event["at"]:
                raise OrderingViolation(
                    f"seed for {scope!r} at {seed_event['at']} does not "
                    f"strictly follow commitment at {committed_at}"
                )
        for batch_id, ballot_index in self.readings:
            if not self._selected(batch_id, ballot_index):
                raise SelectionError(
                    f"log contains a reading for unselected ballot "
                    f"{batch_id}[{ballot_index}]"
                )
        for entries in self.readings.values():
            for reading in entries:
                expected = PreferenceSequence(reading.digitised).rank_differences(
                    PreferenceSequence(reading.human, source="human_read")
                )
                if [tuple(d) for d in reading.rank_diffs] != expected:
                    raise DomainError(
                        f"stored rank diffs for {reading.batch_id}"
                        f"[{reading.ballot_index}] do not recompute from the "
                        f"two sequences"
                    )
