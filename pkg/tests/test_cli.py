"""CLI subcommands: plan, sample, verify (incl. tampering), ci, count, replay."""

from __future__ import annotations

import json

import pytest

from prefaudit.cli import EXIT_OK, EXIT_USAGE, EXIT_VERIFICATION_FAILED, main

CONTEST = {
    "contest_id": "VIC",
    "jurisdiction": "Victoria",
    "candidates": ["A", "B", "C"],
    "seats": 1,
    "enrolled_voters": 500,
}


@pytest.fixture
def workdir(tmp_path):
    contest_path = tmp_path / "contest.json"
    contest_path.write_text(json.dumps(CONTEST), encoding="utf-8")
    lines = ["ballot_index,origin,A,B,C"]
    for i in range(50):
        lines.append(f"{i},boothX,1,2,")
    (tmp_path / "batch.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (tmp_path / "seed.txt").write_text("3,1,4,1,5,9", encoding="utf-8")
    return tmp_path


def _sample_args(workdir, out):
    return [
        "sample",
        "--batch", str(workdir / "batch.csv"),
        "--contest", str(workdir / "contest.json"),
        "--batch-id", "B1",
        "--seed-transcript", str(workdir / "seed.txt"),
        "--p", "0.3",
        "--out", str(out),
    ]


class TestCi:
    def test_worked_example_output(self, capsys):
        assert main(["ci", "--errors", "30", "--n", "5000", "--level", "0.95"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "(0.0041, 0.0086)" in out

    def test_scaled_counts(self, capsys):
        code = main(
            ["ci", "--errors", "30", "--n", "5000", "--cast", "3821539"]
        )
        assert code == EXIT_OK
        assert "scaled to 3821539 cast ballots" in capsys.readouterr().out

    def test_two_stage(self, capsys):
        code = main(
            ["ci", "--errors", "30", "--n", "5000", "--two-stage", "0,1000"]
        )
        assert code == EXIT_OK
        assert "bonferroni_two_stage" in capsys.readouterr().out

    def test_bad_input(self, capsys):
        assert main(["ci", "--errors", "10", "--n", "5"]) == EXIT_USAGE


class TestPlan:
    def test_plan_csv(self, tmp_path, capsys):
        enrolment = tmp_path / "enrolment.csv"
        enrolment.write_text(
            "contest_id,enrolled_voters\nNSW,5427292\nNT,145335\n", encoding="utf-8"
        )
        code = main(
            [
                "plan",
                "--enrolment-file", str(enrolment),
                "--floor", "5000",
                "--strategy", "equal_split",
            ]
        )
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "NSW" in out and "NT" in out
        # equal split of 5000 across 2 contests
        assert ",2500," in out


class TestSampleVerify:
    def test_sample_then_verify_ok(self, workdir, capsys):
        selections = workdir / "selections.csv"
        assert main(_sample_args(workdir, selections)) == EXIT_OK
        code = main(
            [
                "verify",
                "--batch", str(workdir / "batch.csv"),
                "--contest", str(workdir / "contest.json"),
                "--batch-id", "B1",
                "--seed-transcript", str(workdir / "seed.txt"),
                "--selections", str(selections),
            ]
        )
        assert code == EXIT_OK
        assert "verified" in capsys.readouterr().out

    def test_tampered_selection_detected_with_index_named(self, workdir, capsys):
        selections = workdir / "selections.csv"
        main(_sample_args(workdir, selections))
        line = selections.read_text(encoding="utf-8").strip()
        cells = line.split(",")
        tampered_index = cells[3]
        cells[3] = str(int(tampered_index) + 1 if int(tampered_index) + 1 < 50 else 0)
        selections.write_text(",".join(cells) + "\n", encoding="utf-8")
        code = main(
            [
                "verify",
                "--batch", str(workdir / "batch.csv"),
                "--contest", str(workdir / "contest.json"),
                "--batch-id", "B1",
                "--seed-transcript", str(workdir / "seed.txt"),
                "--selections", str(selections),
            ]
        )
        assert code == EXIT_VERIFICATION_FAILED
        err = capsys.readouterr().err
        assert "VERIFY FAIL" in err
        assert tampered_index in err  # the missing index is named

    def test_wrong_seed_detected(self, workdir, capsys):
        selections = workdir / "selections.csv"
        main(_sample_args(workdir, selections))
        (workdir / "seed.txt").write_text("1,1,1,1", encoding="utf-8")
        code = main(
            [
                "verify",
                "--batch", str(workdir / "batch.csv"),
                "--contest", str(workdir / "contest.json"),
                "--batch-id", "B1",
                "--seed-transcript", str(workdir / "seed.txt"),
                "--selections", str(selections),
            ]
        )
        assert code == EXIT_VERIFICATION_FAILED

    def test_commitment_file_checked(self, workdir, capsys):
        selections = workdir / "selections.csv"
        commit_path = workdir / "B1.commit"
        args = _sample_args(workdir, selections) + ["--commit-out", str(commit_path)]
        assert main(args) == EXIT_OK
        # verify passes with the matching commitment file
        code = main(
            [
                "verify",
                "--batch", str(workdir / "batch.csv"),
                "--contest", str(workdir / "contest.json"),
                "--batch-id", "B1",
                "--seed-transcript", str(workdir / "seed.txt"),
                "--selections", str(selections),
                "--commit-file", str(commit_path),
            ]
        )
        assert code == EXIT_OK
        # alter one rank cell in the batch: the commitment no longer matches
        text = (workdir / "batch.csv").read_text(encoding="utf-8")
        (workdir / "batch.csv").write_text(
            text.replace("0,boothX,1,2,", "0,boothX,2,1,"), encoding="utf-8"
        )
        code = main(
            [
                "verify",
                "--batch", str(workdir / "batch.csv"),
                "--contest", str(workdir / "contest.json"),
                "--batch-id", "B1",
                "--seed-transcript", str(workdir / "seed.txt"),
                "--selections", str(selections),
                "--commit-file", str(commit_path),
            ]
        )
        assert code == EXIT_VERIFICATION_FAILED
        assert "commitment mismatch" in capsys.readouterr().err


class TestCountMargin:
    def test_count_emits_round_log(self, workdir, capsys):
        code = main(
            [
                "count",
                "--batch", str(workdir / "batch.csv"),
                "--contest", str(workdir / "contest.json"),
            ]
        )
        assert code == EXIT_OK
        captured = capsys.readouterr()
        assert "round,action" in captured.out
        assert "elected: A" in captured.err

    def test_margin_report(self, workdir, capsys):
        code = main(
            [
                "margin",
                "--batch", str(workdir / "batch.csv"),
                "--contest", str(workdir / "contest.json"),
            ]
        )
        assert code == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["elected"] == ["A"]
        assert report["apparent"]["verified"]

    def test_margin_frozen_first_prefs(self, workdir, capsys):
        code = main(
            [
                "margin",
                "--batch", str(workdir / "batch.csv"),
                "--contest", str(workdir / "contest.json"),
                "--freeze-first-preferences",
            ]
        )
        assert code == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["apparent"]["kind"] == "no_feasible_change"


class TestReplay:
    def test_replay_round_trip(self, tmp_path, capsys):
        from prefaudit.ballots import Contest, commit_batch, parse_preference_file
        from prefaudit.events import EventLog
        from prefaudit.session import AuditSession

        contest = Contest("VIC", "Victoria", ("A", "B", "C"), seats=1)
        log_path = tmp_path / "events.jsonl"
        session = AuditSession(contest, log=EventLog(path=log_path))
        csv_text = "ballot_index,origin,A,B,C\n" + "".join(
            f"{i},x,1,2,\n" for i in range(20)
        )
        batch = commit_batch(
            parse_preference_file(csv_text, contest, "B1"), contest
        )
        session.commit_batch(batch)
        session.register_seed("7,7", "B1", p=0.5)
        assert main(["replay", "--log", str(log_path)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "batches: 1" in out

    def test_replay_detects_tampering(self, tmp_path, capsys):
        from prefaudit.ballots import Contest
        from prefaudit.events import EventLog
        from prefaudit.session import AuditSession

        contest = Contest("VIC", "Victoria", ("A", "B", "C"), seats=1)
        log_path = tmp_path / "events.jsonl"
        session = AuditSession(contest, log=EventLog(path=log_path))
        session.record_turnout("boothX", 10)
        text = log_path.read_text(encoding="utf-8").replace(
            '"count":10', '"count":12'
        )
        log_path.write_text(text, encoding="utf-8")
        assert main(["replay", "--log", str(log_path)]) == EXIT_VERIFICATION_FAILED
        assert "REPLAY FAIL" in capsys.readouterr().err
