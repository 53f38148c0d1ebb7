"""Append-only, hash-chained JSONL event log.

Each event carries the SHA-256 digest of its predecessor, so any
retroactive edit, insertion, or deletion breaks the chain and is caught
by :func:`verify_chain`.  Scrutineers can copy the file and re-verify
offline; the schema is documented field by field in docs/event-log.md.

No record is ever mutated.  Corrections are new events that supersede
earlier ones at fold time.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import TamperError

GENESIS = "0" * 64


@dataclass(frozen=True)
class Event:
    seq: int
    type: str
    at: str  # ISO-8601 UTC timestamp
    payload: dict
    prev: str
    digest: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "seq": self.seq,
                "type": self.type,
                "at": self.at,
                "payload": self.payload,
                "prev": self.prev,
                "digest": self.digest,
            },
            sort_keys=True,
            separators=(",", ":"),
        )


def _canonical_body(seq: int, type_: str, at: str, payload: dict, prev: str) -> bytes:
    return json.dumps(
        {"seq": seq, "type": type_, "at": at, "payload": payload, "prev": prev},
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=True,
    ).encode("utf-8")


def make_event(seq: int, type_: str, at: str, payload: dict, prev: str) -> Event:
    digest = hashlib.sha256(_canonical_body(seq, type_, at, payload, prev)).hexdigest()
    return Event(seq=seq, type=type_, at=at, payload=payload, prev=prev, digest=digest)


class EventLog:
    """In-memory chain with an optional JSONL file mirror."""

    def __init__(self, path: Path | None = None):
        self.events: list[Event] = []
        self.path = path

    @property
    def head(self) -> str:
        return self.events[-1].digest if self.events else GENESIS

    def append(self, type_: str, payload: dict, at: str) -> Event:
        event = make_event(len(self.events), type_, at, payload, self.head)
        self.events.append(event)
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(event.to_json() + "\n")
        return event

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)


def verify_chain(events: Iterable[Event]) -> None:
    """Raise TamperError on any digest or linkage mismatch."""
    prev = GENESIS
    for i, event in enumerate(events):
        if event.seq != i:
            raise TamperError(f"event {i} carries sequence number {event.seq}")
        if event.prev != prev:
            raise TamperError(
                f"event {i} ({event.type}) links to {event.prev[:12]}… but the "
                f"predecessor digest is {prev[:12]}…"
            )
        expected = hashlib.sha256(
            _canonical_body(event.seq, event.type, event.at, event.payload, event.prev)
        ).hexdigest()
        if event.digest != expected:
            raise TamperError(
                f"event {i} ({event.type}) digest mismatch: payload was altered"
            )
        prev = event.digest


def parse_event_line(line: str) -> Event:
    record = json.loads(line)
    return Event(
        seq=record["seq"],
        type=record["type"],
        at=record["at"],
        payload=record["payload"],
        prev=record["prev"],
        digest=record["digest"],
    )


def load_events(path: Path) -> list[Event]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                events.append(parse_event_line(line))
    return events
