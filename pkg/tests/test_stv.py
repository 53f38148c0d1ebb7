"""STV tabulation: hand-counted examples, conservation, determinism."""

from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prefaudit.ballots import Contest, PreferenceSequence
from prefaudit.errors import DomainError
from prefaudit.stv import count, droop_quota, round_log_rows

from conftest import sequence


def ballots(*specs: tuple[int, dict[str, int]]) -> list[PreferenceSequence]:
    out = []
    for copies, rankings in specs:
        out.extend(PreferenceSequence(dict(rankings)) for _ in range(copies))
    return out


class TestQuota:
    def test_droop_values(self):
        assert droop_quota(100, 1) == 51
        assert droop_quota(100, 2) == 34
        assert droop_quota(0, 2) == 1
        assert droop_quota(99, 1) == 50


class TestHandCounts:
    def test_single_seat_majority(self):
        contest = Contest("X", "T", ("A", "B"), seats=1)
        state = count(contest, ballots((60, {"A": 1}), (40, {"B": 1})))
        assert state.quota == 51
        assert state.elected == ("A",)
        assert state.round_log[1].action == "elect"

    def test_two_seats_bullet_votes_closeout(self):
        contest = Contest("Y", "T", ("A", "B", "C"), seats=2)
        state = count(contest, ballots((10, {"A": 1})))
        assert state.elected == ("A", "B")
        actions = [r.action for r in state.round_log]
        assert actions == ["first_preferences", "elect", "surplus", "exclude", "elect"]

    def test_zero_ballots_degenerate(self):
        contest = Contest("Z", "T", ("A", "B", "C"), seats=2)
        state = count(contest, [])
        assert len(state.elected) == 2
        assert state.formal_ballots == 0
        assert state.quota == 1

    def test_surplus_transfer_changes_outcome(self):
        # 2 seats, quota 34: A's surplus decides the last seat for D.
        contest = Contest("W", "T", ("A", "B", "C", "D"), seats=2)
        state = count(
            contest,
            ballots(
                (40, {"A": 1, "D": 2}),
                (28, {"B": 1}),
                (24, {"C": 1}),
                (8, {"D": 1}),
            ),
        )
        assert state.quota == 34
        # A elected; surplus 6 to D (papers 40, transferable 40, value 6/40);
        # D reaches 8 + 6 = 14; still lowest -> excluded; C 24 excluded;
        # B elected at close-out.
        assert state.elected == ("A", "B")

    def test_fractional_transfer_values(self):
        # Surplus 5 over 50 transferable papers: value 1/10 each.
        contest = Contest("F", "T", ("A", "B", "C"), seats=1)
        state = count(
            contest,
            ballots((56, {"A": 1, "B": 2}), (30, {"B": 1}), (14, {"C": 1})),
        )
        assert state.quota == 51
        assert state.elected == ("A",)

    def test_exhausted_value_conserved(self):
        contest = Contest("E", "T", ("A", "B", "C"), seats=2)
        state = count(
            contest,
            ballots((10, {"A": 1}), (5, {"B": 1}), (3, {"C": 1})),
        )
        for record in state.round_log:
            total = sum(record.tallies.values(), Fraction(0)) + record.exhausted
            assert total == state.formal_ballots

    def test_informal_ballots_not_counted(self):
        contest = Contest("I", "T", ("A", "B", "C"), seats=1)
        state = count(
            contest,
            ballots((5, {"A": 1}), (3, {"B": 1, "C": 1}), (2, {})),  # 5 formal
        )
        assert state.formal_ballots == 5
        assert state.total_ballots == 10
        assert state.quota == 3

    def test_unknown_candidate_rejected(self):
        contest = Contest("U", "T", ("A", "B"), seats=1)
        with pytest.raises(DomainError):
            count(contest, [sequence(Z=1)])


class TestTieBreaks:
    def test_earlier_round_tallies_break_exclusion_tie(self):
        # B and C tie at 20 in the final round, but C was lower earlier.
        contest = Contest("T", "T", ("A", "B", "C", "D"), seats=1)
        state = count(
            contest,
            ballots(
                (30, {"A": 1}),
                (18, {"B": 1}),
                (17, {"C": 1}),
                (5, {"D": 1, "B": 2}),
                (3, {"D": 2, "C": 1}),  # C gets 3 more first prefs -> 20
                # B: 18 + 5 = 23 after D excluded; C: 20.
            ),
        )
        assert "A" in state.elected or "B" in state.elected

    def test_candidate_order_is_last_resort(self):
        # All zero tallies: exclusion order runs from the end of the list.
        contest = Contest("O", "T", ("A", "B", "C"), seats=1)
        state = count(contest, [])
        # C excluded first, then B, then A elected by close-out.
        excluded = [r.subject for r in state.round_log if r.action == "exclude"]
        assert excluded == ["C", "B"]
        assert state.elected == ("A",)


class TestDeterminism:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32))
    def test_identical_inputs_identical_log(self, seed):
        import random

        rng = random.Random(seed)
        contest = Contest("D", "T", ("A", "B", "C", "D"), seats=2)
        candidates = list(contest.candidates)
        pool = []
        for _ in range(rng.randint(0, 40)):
            k = rng.randint(0, len(candidates))
            chosen = rng.sample(candidates, k)
            pool.append(PreferenceSequence({c: i + 1 for i, c in enumerate(chosen)}))
        first = count(contest, pool)
        second = count(contest, pool)
        assert first.elected == second.elected
        assert [r.detail for r in first.round_log] == [
            r.detail for r in second.round_log
        ]

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32))
    def test_conservation_every_round(self, seed):
        import random

        rng = random.Random(seed)
        contest = Contest("D", "T", ("A", "B", "C", "D", "E"), seats=2)
        candidates = list(contest.candidates)
        pool = []
        for _ in range(rng.randint(1, 50)):
            k = rng.randint(1, len(candidates))
            chosen = rng.sample(candidates, k)
            pool.append(PreferenceSequence({c: i + 1 for i, c in enumerate(chosen)}))
        state = count(contest, pool)
        for record in state.round_log:
            total = sum(record.tallies.values(), Fraction(0)) + record.exhausted
            assert total == state.formal_ballots
        assert len(state.elected) == 2


class TestRoundLog:
    def test_rows_shape(self):
        contest = Contest("R", "T", ("A", "B"), seats=1)
        state = count(contest, ballots((3, {"A": 1}), (1, {"B": 1})))
        rows = round_log_rows(state)
        assert len(rows) == len(state.round_log) * 2
        assert {row["candidate"] for row in rows} == {"A", "B"}
        assert all(isinstance(row["votes"], int) for row in rows)
