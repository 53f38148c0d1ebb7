"""Contest and ballot data model, preference-file parsing, commitments.

A batch of digitised preferences is committed to (SHA-256 over a canonical
serialization) before any sampling seed exists, so the digitisation side
cannot quietly revise preferences after learning which ballots will be
inspected.  The canonical form is deliberately rigid — one ballot per
line, fixed column order, LF endings — because the commitment is only as
good as the serialization is unambiguous.

Rank interpretation: a ballot contributes to the count along its maximal
valid prefix 1, 2, 3, …; the prefix stops just before the first rank that
is missing or held by more than one candidate.  Everything after the
break is retained in the data (and compared during the audit) but never
counted.
"""

from __future__ import annotations

import csv
import hashlib
import io
import re
from dataclasses import dataclass, replace

from .errors import DomainError, EmptyBatchError, FormatError, SchemaError

_RANK_CELL = re.compile(r"^\d+$")
_LABEL_FORBIDDEN = re.compile(r"[,\n\r]")

DIGITISED = "digitised"
HUMAN_READ = "human_read"


@dataclass(frozen=True)
class Contest:
    contest_id: str
    jurisdiction_name: str
    candidates: tuple[str, ...]
    seats: int
    enrolled_voters: int = 0

    def __post_init__(self):
        if len(set(self.candidates)) != len(self.candidates):
            raise DomainError(f"duplicate candidate ids in contest {self.contest_id}")
        if not 1 <= self.seats < len(self.candidates):
            raise DomainError(
                f"seats must satisfy 1 <= seats < candidates "
                f"({self.seats} vs {len(self.candidates)})"
            )
        if self.enrolled_voters < 0:
            raise DomainError("enrolled_voters cannot be negative")
        object.__setattr__(self, "candidates", tuple(self.candidates))


@dataclass(frozen=True)
class PreferenceSequence:
    """A ballot's rank marks: candidate -> positive integer rank."""

    rankings: dict[str, int]
    source: str = DIGITISED

    def __post_init__(self):
        for candidate, rank in self.rankings.items():
            if not isinstance(rank, int) or rank < 1:
                raise DomainError(
                    f"rank for {candidate!r} must be a positive integer, got {rank!r}"
                )
        if self.source not in (DIGITISED, HUMAN_READ):
            raise DomainError(f"unknown preference source {self.source!r}")

    def usable_prefix(self) -> list[str]:
        """Candidates in counting order along the maximal valid prefix."""
        by_rank: dict[int, list[str]] = {}
        for candidate, rank in self.rankings.items():
            by_rank.setdefault(rank, []).append(candidate)
        prefix: list[str] = []
        rank = 1
        while rank in by_rank and len(by_rank[rank]) == 1:
            prefix.append(by_rank[rank][0])
            rank += 1
        return prefix

    def truncated(self) -> "PreferenceSequence":
        """The sequence restricted to its usable prefix (idempotent)."""
        prefix = self.usable_prefix()
        return PreferenceSequence(
            rankings={c: i + 1 for i, c in enumerate(prefix)}, source=self.source
        )

    def rank_differences(self, other: "PreferenceSequence") -> list[tuple[str, int | None, int | None]]:
        """All candidates ranked differently between two raw sequences."""
        diffs = []
        for candidate in sorted(set(self.rankings) | set(other.rankings)):
            mine = self.rankings.get(candidate)
            theirs = other.rankings.get(candidate)
            if mine != theirs:
                diffs.append((candidate, mine, theirs))
        return diffs


@dataclass(frozen=True)
class IndexedBallot:
    ballot_index: int
    preferences: PreferenceSequence
    origin_label: str = ""

    def __post_init__(self):
        if self.ballot_index < 0:
            raise DomainError("ballot_index cannot be negative")
        if _LABEL_FORBIDDEN.search(self.origin_label):
            raise DomainError(
                f"origin label {self.origin_label!r} contains a comma or newline; "
                "the canonical serialization reserves both"
            )


@dataclass(frozen=True)
class Batch:
    """An ordered, index-contiguous set of ballots for one contest.

    ``commitment`` is empty until :func:`commit_batch` seals the batch;
    afterwards the value is immutable and any edit is detectable.
    """

    batch_id: str
    contest_id: str
    ballots: tuple[IndexedBallot, ...]
    commitment: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ballots", tuple(self.ballots))
        for expected, ballot in enumerate(self.ballots):
            if ballot.ballot_index != expected:
                raise DomainError(
                    f"ballot indices must be contiguous from 0; expected "
                    f"{expected}, found {ballot.ballot_index}"
                )
        if _LABEL_FORBIDDEN.search(self.batch_id):
            raise DomainError("batch_id cannot contain commas or newlines")

    @property
    def size(self) -> int:
        return len(self.ballots)

    @property
    def is_committed(self) -> bool:
        return bool(self.commitment)


def canonical_serialization(batch: Batch, contest: Contest) -> bytes:
    """Canonical byte form: `index,origin,rank_1,…,rank_m` + LF per ballot.

    Rank cells follow the contest's candidate order, empty when unranked.
    The empty batch serializes to zero bytes.
    """
    lines = []
    for ballot in batch.ballots:
        cells = [str(ballot.ballot_index), ballot.origin_label]
        for candidate in contest.candidates:
            rank = ballot.preferences.rankings.get(candidate)
            cells.append("" if rank is None else str(rank))
        lines.append(",".join(cells) + "\n")
    return "".join(lines).encode("utf-8")


def commit_batch(batch: Batch, contest: Contest) -> Batch:
    """Seal the batch with the SHA-256 digest of its canonical form."""
    digest = hashlib.sha256(canonical_serialization(batch, contest)).hexdigest()
    return replace(batch, commitment=digest)


def verify_commitment(batch: Batch, contest: Contest) -> bool:
    if not batch.is_committed:
        return False
    digest = hashlib.sha256(canonical_serialization(batch, contest)).hexdigest()
    return digest == batch.commitment


def parse_preference_file(data: bytes | str, contest: Contest, batch_id: str) -> Batch:
    """Parse a preference CSV export into an uncommitted Batch.

    Expected header: ``ballot_index,origin,<cand_1>,…,<cand_m>`` where the
    candidate columns are exactly the contest's candidates (any order).
    Rank cells are positive integers or empty.  Semantically odd ranks
    (duplicates, skipped ranks) are kept as written; the prefix rule deals
    with them at count time.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"preference file is not valid UTF-8: {exc}") from exc
    else:
        text = data
    if text.strip() == "":
        raise EmptyBatchError(f"preference file for batch {batch_id!r} is empty")

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyBatchError(f"preference file for batch {batch_id!r} is empty")

    header = [cell.strip() for cell in header]
    if len(header) < 2 or header[0] != "ballot_index" or header[1] != "origin":
        missing = "ballot_index" if (not header or header[0] != "ballot_index") else "origin"
        raise FormatError(
            f"header must start with 'ballot_index,origin'; missing column "
            f"{missing!r} in {header!r}"
        )
    file_candidates = header[2:]
    expected = set(contest.candidates)
    unknown = [c for c in file_candidates if c not in expected]
    if unknown:
        raise SchemaError(
            f"unknown candidate column(s) {unknown} for contest {contest.contest_id}"
        )
    missing_cands = [c for c in contest.candidates if c not in file_candidates]
    if missing_cands:
        raise SchemaError(
            f"missing candidate column(s) {missing_cands} for contest "
            f"{contest.contest_id}"
        )
    if len(set(file_candidates)) != len(file_candidates):
        raise SchemaError("duplicate candidate columns in header")

    ballots: list[IndexedBallot] = []
    for row_number, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and row[0].strip() == ""):
            continue
        if len(row) != len(header):
            raise FormatError(
                f"row {row_number} has {len(row)} cells, header has {len(header)}"
            )
        index_text = row[0].strip()
        if not _RANK_CELL.match(index_text):
            raise FormatError(f"row {row_number}: ballot_index {row[0]!r} is not an integer")
        ballot_index = int(index_text)
        if ballot_index != len(ballots):
            raise FormatError(
                f"row {row_number}: ballot_index {ballot_index} breaks the "
                f"contiguous 0..k-1 sequence (expected {len(ballots)})"
            )
        origin = row[1].strip()
        rankings: dict[str, int] = {}
        for candidate, cell in zip(file_candidates, row[2:]):
            cell = cell.strip()
            if cell == "":
                continue
            if not _RANK_CELL.match(cell) or int(cell) < 1:
                raise FormatError(
                    f"row {row_number}, column {candidate!r}: rank cell {cell!r} "
                    f"is not a positive integer"
                )
            rankings[candidate] = int(cell)
        ballots.append(
            IndexedBallot(
                ballot_index=ballot_index,
                preferences=PreferenceSequence(rankings=rankings, source=DIGITISED),
                origin_label=origin,
            )
        )
    return Batch(batch_id=batch_id, contest_id=contest.contest_id, ballots=tuple(ballots))


def preference_file_text(batch: Batch, contest: Contest) -> str:
    """Render a batch back to the documented CSV format (with header)."""
    header = "ballot_index,origin," + ",".join(contest.candidates)
    return header + "\n" + canonical_serialization(batch, contest).decode("utf-8")


# ── commitment file: `<batch_id>.commit` with digest and timestamp ────


def format_commitment_file(batch: Batch, committed_at: str) -> str:
    if not batch.is_committed:
        raise DomainError("batch has no commitment to record")
    return f"batch_id: {batch.batch_id}\ndigest: {batch.commitment}\ncommitted_at: {committed_at}\n"


def parse_commitment_file(text: str) -> dict[str, str]:
    fields: dict[str, str] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(":")
        fields[key.strip()] = value.strip()
    for required in ("batch_id", "digest", "committed_at"):
        if required not in fields:
            raise FormatError(f"commitment file missing field {required!r}")
    return fields


def contest_from_json(payload: dict) -> Contest:
    """Contest from its JSON file form (see docs/file-formats.md)."""
    try:
        return Contest(
            contest_id=payload["contest_id"],
            jurisdiction_name=payload.get("jurisdiction", payload.get("jurisdiction_name", "")),
            candidates=tuple(payload["candidates"]),
            seats=int(payload["seats"]),
            enrolled_voters=int(payload.get("enrolled_voters", 0)),
        )
    except KeyError as exc:
        raise FormatError(f"contest file missing field {exc.args[0]!r}") from exc
