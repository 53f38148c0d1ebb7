"""Command-line interface.

Subcommands:

  plan     selection probabilities for an enrolment file
  sample   derive selections for a committed batch from a seed transcript
  verify   re-derive selections and diff against a published selection file
  count    run the STV count, emit the round log
  margin   apparent-margin bounds for a counted contest
  ci       exact confidence interval for an observed error count
  serve    run the HTTP/JSON service for the console
  replay   rebuild a session from its event log and report its tallies

Exit codes: 0 success; 1 verification failure (mismatch/tamper);
2 invalid input or usage.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__, planning, sampling, stats
from .ballots import (
    Batch,
    commit_batch,
    contest_from_json,
    format_commitment_file,
    parse_commitment_file,
    parse_preference_file,
)
from .errors import AuditError
from .events import load_events, verify_chain
from .margins import apparent_margin, last_round_margin, quota_raise_bound
from .session import AuditSession
from .stv import count as stv_count, round_log_rows

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_USAGE = 2


def _read_contest(path: str):
    with open(path, encoding="utf-8") as fh:
        return contest_from_json(json.load(fh))


def _read_batch(args) -> tuple[Batch, object]:
    contest = _read_contest(args.contest)
    with open(args.batch, "rb") as fh:
        data = fh.read()
    batch = parse_preference_file(data, contest, batch_id=args.batch_id)
    return commit_batch(batch, contest), contest


@dataclass(frozen=True)
class _PlanRow:
    contest_id: str
    enrolled_voters: int


def cmd_plan(args) -> int:
    rows = []
    with open(args.enrolment_file, encoding="utf-8") as fh:
        for record in csv.DictReader(fh):
            rows.append(record)
    if not rows:
        print("enrolment file has no rows", file=sys.stderr)
        return EXIT_USAGE

    contests = [
        _PlanRow(contest_id=r["contest_id"], enrolled_voters=int(r["enrolled_voters"]))
        for r in rows
    ]
    weights = None
    if args.strategy == "custom":
        weights = {
            r["contest_id"]: float(r.get("weight", 1.0)) for r in rows
        }
    plans = planning.allocate_targets(
        contests,
        overall_floor=args.floor,
        strategy=args.strategy,
        weights=weights,
        assurance=args.assurance,
    )
    writer = csv.DictWriter(
        sys.stdout,
        fieldnames=["contest_id", "n", "target", "assurance", "p", "expected_sample"],
    )
    writer.writeheader()
    for row in planning.plan_report_rows(plans):
        writer.writerow(row)
    return EXIT_OK


def cmd_sample(args) -> int:
    batch, _contest = _read_batch(args)
    with open(args.seed_transcript, encoding="utf-8") as fh:
        transcript = fh.read()
    seed = sampling.seed_from_ceremony(transcript)
    stream = sampling.stream_for(seed, batch.batch_id)
    indices = sampling.geometric_skip(stream, args.p, batch.size)
    line = sampling.format_selection_line(batch.batch_id, args.p, seed, indices)
    if args.out:
        Path(args.out).write_text(line + "\n", encoding="utf-8")
    else:
        print(line)
    if args.commit_out:
        from datetime import datetime, timezone

        stamp = datetime.now(timezone.utc).isoformat()
        Path(args.commit_out).write_text(
            format_commitment_file(batch, stamp), encoding="utf-8"
        )
    print(
        f"batch {batch.batch_id}: {batch.size} ballots, commitment "
        f"{batch.commitment[:16]}…, {len(indices)} selected",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    batch, _contest = _read_batch(args)
    with open(args.seed_transcript, encoding="utf-8") as fh:
        transcript = fh.read()
    seed = sampling.seed_from_ceremony(transcript)

    with open(args.selections, encoding="utf-8") as fh:
        line = fh.readline()
    batch_id, p, seed_digest, claimed = sampling.parse_selection_line(line)

    failures = []
    if batch_id != batch.batch_id:
        failures.append(f"selection file names batch {batch_id!r}, not {batch.batch_id!r}")
    if seed_digest != seed.hex_digest:
        failures.append("seed digest in selection file does not match transcript")
    if args.commit_file:
        fields = parse_commitment_file(Path(args.commit_file).read_text(encoding="utf-8"))
        if fields["digest"] != batch.commitment:
            failures.append(
                f"batch commitment mismatch: file says {fields['digest'][:16]}…, "
                f"recomputed {batch.commitment[:16]}…"
            )

    stream = sampling.stream_for(seed, batch.batch_id)
    expected = sampling.geometric_skip(stream, p, batch.size)
    if sorted(set(claimed)) != expected:
        expected_set, claimed_set = set(expected), set(claimed)
        missing = sorted(expected_set - claimed_set)
        extra = sorted(claimed_set - expected_set)
        if missing:
            failures.append(f"indices missing from published selection: {missing}")
        if extra:
            failures.append(f"published selection contains unexpected indices: {extra}")
        if not missing and not extra:
            failures.append("published selection differs from recomputation")

    if failures:
        for failure in failures:
            print(f"VERIFY FAIL: {failure}", file=sys.stderr)
        return EXIT_VERIFICATION_FAILED
    print(f"verified: {len(expected)} selections reproduce exactly")
    return EXIT_OK


def cmd_count(args) -> int:
    batch, contest = _read_batch(args)
    state = stv_count(contest, [b.preferences for b in batch.ballots])
    writer = csv.DictWriter(
        sys.stdout,
        fieldnames=["round", "action", "detail", "candidate", "votes", "exhausted"],
    )
    writer.writeheader()
    for row in round_log_rows(state):
        writer.writerow(row)
    print(f"quota: {state.quota}", file=sys.stderr)
    print(f"elected: {', '.join(state.elected)}", file=sys.stderr)
    return EXIT_OK


def cmd_margin(args) -> int:
    batch, contest = _read_batch(args)
    state = stv_count(contest, [b.preferences for b in batch.ballots])
    report = {
        "elected": list(state.elected),
        "quota": state.quota,
        "last_round": _estimate_dict(last_round_margin(state)),
        "quota_raise": {
            c: _estimate_dict(quota_raise_bound(state, c)) for c in state.non_winners
        },
        "apparent": _estimate_dict(
            apparent_margin(state, allow_first_preference_changes=not args.freeze_first_preferences)
        ),
    }
    json.dump(report, sys.stdout, indent=2)
    print()
    return EXIT_OK


def _estimate_dict(estimate) -> dict:
    return {
        "kind": estimate.kind,
        "vote_changes": estimate.vote_changes,
        "pct": round(estimate.pct, 6),
        "effect": estimate.effect,
        "applicable": estimate.applicable,
        "verified": estimate.verified,
        "note": estimate.note,
    }


def cmd_ci(args) -> int:
    if args.two_stage:
        try:
            k2_text, n2_text = args.two_stage.split(",")
            k2, n2 = int(k2_text), int(n2_text)
        except ValueError:
            print("--two-stage expects 'errors,n'", file=sys.stderr)
            return EXIT_USAGE
        stage1 = stats.ErrorSample(
            ballots_inspected=args.n,
            ballots_with_error=args.errors,
            total_rank_discrepancies=args.errors,
            stage=1,
        )
        stage2 = stats.ErrorSample(
            ballots_inspected=n2,
            ballots_with_error=k2,
            total_rank_discrepancies=k2,
            stage=2,
        )
        ci = stats.two_stage_interval(stage1, stage2, args.level)
    else:
        ci = stats.clopper_pearson(args.errors, args.n, args.level)
    print(f"method: {ci.method}")
    print(f"level: {ci.level}")
    print(f"interval: ({ci.lower:.4f}, {ci.upper:.4f})")
    if args.cast:
        lower_count, upper_count = stats.scale_to_counts(ci, args.cast)
        print(f"scaled to {args.cast} cast ballots: ({lower_count}, {upper_count})")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .api import load_config, run_server

    config = load_config(args.config)
    run_server(config)
    return EXIT_OK


def cmd_replay(args) -> int:
    events = load_events(Path(args.log))
    try:
        verify_chain(events)
    except AuditError as exc:
        print(f"REPLAY FAIL: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION_FAILED
    session = AuditSession.replay(events)
    sample = session.error_sample()
    print(f"session: {session.session_id}")
    print(f"phase: {session.phase}")
    print(f"log head: {session.log.head}")
    print(f"batches: {len(session.batch_meta)}")
    print(
        f"readings: {sample.ballots_inspected} inspected, "
        f"{sample.ballots_with_error} with errors, "
        f"{sample.total_rank_discrepancies} rank discrepancies"
    )
    if session.conclusions:
        conclusion = session.conclusions[-1]
        print(
            f"conclusion: {conclusion.scenario} "
            f"(ci counts {conclusion.ci_counts}, margin {conclusion.margin_votes})"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prefaudit",
        description="Audit toolkit for digitised preferential ballots.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="selection probabilities from an enrolment CSV")
    p.add_argument("--enrolment-file", required=True)
    p.add_argument("--floor", type=int, default=planning.MULTI_CONTEST_FLOOR)
    p.add_argument(
        "--strategy",
        choices=["equal_split", "single_contest", "custom"],
        default="equal_split",
    )
    p.add_argument("--assurance", type=float, default=planning.DEFAULT_ASSURANCE)
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("sample", help="derive selections for a committed batch")
    p.add_argument("--batch", required=True, help="preference CSV file")
    p.add_argument("--contest", required=True, help="contest JSON file")
    p.add_argument("--batch-id", required=True)
    p.add_argument("--seed-transcript", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--out", help="write the selection line here")
    p.add_argument("--commit-out", help="write the commitment file here")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("verify", help="re-derive selections and diff")
    p.add_argument("--batch", required=True)
    p.add_argument("--contest", required=True)
    p.add_argument("--batch-id", required=True)
    p.add_argument("--seed-transcript", required=True)
    p.add_argument("--selections", required=True)
    p.add_argument("--commit-file")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("count", help="run the STV count")
    p.add_argument("--batch", required=True)
    p.add_argument("--contest", required=True)
    p.add_argument("--batch-id", default="count-input")
    p.set_defaults(fn=cmd_count)

    p = sub.add_parser("margin", help="apparent-margin bounds")
    p.add_argument("--batch", required=True)
    p.add_argument("--contest", required=True)
    p.add_argument("--batch-id", default="margin-input")
    p.add_argument("--freeze-first-preferences", action="store_true")
    p.set_defaults(fn=cmd_margin)

    p = sub.add_parser("ci", help="exact error-rate confidence interval")
    p.add_argument("--errors", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--level", type=float, default=stats.DEFAULT_LEVEL)
    p.add_argument("--cast", type=int, help="scale the interval to ballot counts")
    p.add_argument("--two-stage", help="second-stage counts as 'errors,n'")
    p.set_defaults(fn=cmd_ci)

    p = sub.add_parser("serve", help="run the HTTP/JSON service")
    p.add_argument("--config", required=True, help="key = value config file")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("replay", help="rebuild a session from its event log")
    p.add_argument("--log", required=True, help="events.jsonl path")
    p.set_defaults(fn=cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except AuditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
