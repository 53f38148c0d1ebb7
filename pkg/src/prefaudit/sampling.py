"""Transparent, replayable ballot selection.

Everything here is deterministic given (seed transcript, selection
probability, batch scope):

- The seed is the SHA-256 digest of the public ceremony transcript.
- Uniform draws come from SHA-256 in counter mode:
  ``u = int_be(SHA256(seed || scope_utf8 || counter_be64)[:8]) / 2**64``.
  The scope sits between two fixed-width fields, so distinct
  (scope, counter) pairs can never collide as hash inputs.
- Ballot selection uses Bernoulli sampling via geometric skipping: from
  the current position, jump ahead ``1 + floor(ln(u) / ln(1 - p))``
  ballots per draw.  Each ballot is included independently with
  probability p, and restarting the stream per batch preserves that.

Scrutineers re-run this code (or their own implementation of the
construction above) against the published transcript and committed batch
to confirm the selections; see ``verify_selection`` and the CLI `verify`
subcommand.

Floating-point discipline: uniforms are 64-bit integers divided by 2**64
(correctly-rounded double division); the skip uses double-precision
``math.log`` / ``math.log1p``.  A draw of exactly zero is remapped to
2**-64 to avoid log(0).  The per-ballot cross-check path avoids float
thresholds entirely by comparing the raw 64-bit draw against an integer
threshold chosen so that ``raw < threshold`` iff ``raw / 2**64 < p``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

from .errors import DomainError, OrderingViolation

_TWO64 = 1 << 64
_MIN_UNIFORM = 2.0 ** -64
_MAX_UNIFORM = 1.0 - 2.0 ** -53


def _to_unit(raw: int) -> float:
    """Map a 64-bit draw to [0, 1).

    Correctly-rounded division sends the top 1024 raw values to exactly
    1.0; those are clamped to the largest double below 1 so the
    half-open contract holds (mirror of the u = 0 remap in the skip).
    """
    u = raw / _TWO64
    return _MAX_UNIFORM if u >= 1.0 else u


@dataclass(frozen=True)
class Seed:
    """A ceremony transcript and the canonical 32-byte seed derived from it."""

    raw_entropy: str
    canonical_seed: bytes

    @property
    def hex_digest(self) -> str:
        return self.canonical_seed.hex()


def seed_from_ceremony(transcript: str) -> Seed:
    """Derive the canonical seed from a public ceremony transcript.

    The transcript (say, a dice-roll record) is retained so scrutineers
    can recompute the digest themselves.  Empty or whitespace-only
    transcripts are rejected: a seed with no entropy behind it is
    predictable, which defeats the point of the ceremony.
    """
    if not transcript or not transcript.strip():
        raise DomainError("seed ceremony transcript must be nonempty")
    return Seed(
        raw_entropy=transcript,
        canonical_seed=hashlib.sha256(transcript.encode("utf-8")).digest(),
    )


@dataclass
class SelectionStream:
    """Sequential uniform draws scoped to one (seed, batch) pair."""

    seed: Seed
    batch_scope: str
    draw_counter: int = field(default=0)

    def _digest(self, counter: int) -> bytes:
        message = (
            self.seed.canonical_seed
            + self.batch_scope.encode("utf-8")
            + counter.to_bytes(8, "big")
        )
        return hashlib.sha256(message).digest()

    def next_raw(self) -> int:
        """Next draw as a raw 64-bit integer (first 8 digest bytes)."""
        if self.draw_counter >= _TWO64:
            raise DomainError("draw counter exhausted")
        raw = int.from_bytes(self._digest(self.draw_counter)[:8], "big")
        self.draw_counter += 1
        return raw

    def next_uniform(self) -> float:
        """Next draw as a double in [0, 1)."""
        return _to_unit(self.next_raw())

    def raw_lanes(self, count: int):
        """Yield ``count`` raw 64-bit draws, four per digest block.

        Bulk interface for resampling loops (bootstrap): the whole 32-byte
        block is consumed in four big-endian lanes, advancing the counter
        once per block.  Selection paths use ``next_uniform`` (first lane
        only) as documented; the two uses never share a stream object.
        """
        produced = 0
        while produced < count:
            if self.draw_counter >= _TWO64:
                raise DomainError("draw counter exhausted")
            block = self._digest(self.draw_counter)
            self.draw_counter += 1
            for lane in range(0, 32, 8):
                if produced == count:
                    return
                yield int.from_bytes(block[lane : lane + 8], "big")
                produced += 1


def stream_for(seed: Seed, batch_scope: str) -> SelectionStream:
    return SelectionStream(seed=seed, batch_scope=batch_scope)


def raw_threshold(p: float) -> int:
    """Smallest raw value NOT selected under probability p.

    Binary search for the boundary where ``unit(raw) < p`` flips, so the
    integer comparison path agrees with the float comparison draw for
    draw (including the clamped top-of-range values).
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"selection probability must lie in [0, 1], got {p}")
    lo, hi = 0, _TWO64
    while lo < hi:
        mid = (lo + hi) // 2
        if _to_unit(mid) < p:
            lo = mid + 1
        else:
            hi = mid
    return lo


def geometric_skip(stream: SelectionStream, p: float, batch_size: int) -> list[int]:
    """Select ballot indices in [0, batch_size) with inclusion probability p.

    One uniform per selection event: from position pos (starting at -1),
    advance by ``1 + floor(ln(u) / ln(1 - p))``.  p = 1 selects everything
    (skip is identically 1); p = 0 selects nothing and consumes no draws.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"selection probability must lie in [0, 1], got {p}")
    if batch_size < 0:
        raise DomainError(f"batch size cannot be negative, got {batch_size}")
    if p == 0.0 or batch_size == 0:
        return []
    log_q = math.log1p(-p) if p < 1.0 else None
    selected: list[int] = []
    pos = -1
    while True:
        u = stream.next_uniform()
        if u == 0.0:
            u = _MIN_UNIFORM
        if log_q is None:
            skip = 1
        else:
            skip = 1 + math.floor(math.log(u) / log_q)
        pos += skip
        if pos >= batch_size:
            return selected
        selected.append(pos)


def bernoulli_select(stream: SelectionStream, p: float, batch_size: int) -> list[int]:
    """Per-ballot Bernoulli path: one draw per ballot, integer threshold.

    Cross-check for the geometric-skip path: consumes one uniform per
    ballot instead of one per skip, so the two paths agree in distribution
    (every ballot included independently with probability p), not draw for
    draw.
    """
    threshold = raw_threshold(p)
    if batch_size < 0:
        raise DomainError(f"batch size cannot be negative, got {batch_size}")
    return [i for i in range(batch_size) if stream.next_raw() < threshold]


def uniform_draw(
    stream: SelectionStream,
    population_size: int,
    count: int,
    exclude: set[int] | None = None,
) -> list[int]:
    """Draw ``count`` distinct indices uniformly from [0, population_size).

    Used for top-up draws and second-pass sampling, where every cast
    ballot must be reachable with equal probability.  Rejection sampling
    on the raw 64-bit draws (multiply-shift scaling; bias < n/2**64).
    """
    if population_size < 0:
        raise DomainError("population size cannot be negative")
    excluded = set(exclude or ())
    available = population_size - len([i for i in excluded if 0 <= i < population_size])
    if count > available:
        raise DomainError(
            f"cannot draw {count} distinct indices from {available} available"
        )
    chosen: list[int] = []
    seen = set(excluded)
    while len(chosen) < count:
        idx = (stream.next_raw() * population_size) >> 64
        if idx in seen:
            continue
        seen.add(idx)
        chosen.append(idx)
    return sorted(chosen)


def verify_selection(
    seed: Seed,
    p: float,
    batch_scope: str,
    batch_size: int,
    claimed: list[int],
    *,
    batch_committed_at: str | None = None,
    seed_registered_at: str | None = None,
) -> bool:
    """True iff ``claimed`` equals the re-derived selection exactly.

    Claimed selections are sets: order is canonicalized ascending and
    duplicates collapse before comparison.  When both timestamps are
    supplied (ISO-8601 strings compare lexicographically), the batch
    commitment must strictly precede the seed registration; otherwise the
    selection was predictable and an OrderingViolation is raised rather
    than returning a verdict.
    """
    if batch_committed_at is not None and seed_registered_at is not None:
        if not batch_committed_at < seed_registered_at:
            raise OrderingViolation(
                f"batch committed at {batch_committed_at} but seed registered "
                f"at {seed_registered_at}; commitment must come strictly first"
            )
    expected = geometric_skip(stream_for(seed, batch_scope), p, batch_size)
    return sorted(set(claimed)) == expected


# ── selection file format ──────────────────────────────────────────────
# One line per batch: batch_id,p,seed_digest,idx1,idx2,...
# Published alongside the seed transcript so scrutineers can re-derive.


def format_selection_line(
    batch_id: str, p: float, seed: Seed, indices: list[int]
) -> str:
    cells = [batch_id, repr(p), seed.hex_digest] + [str(i) for i in indices]
    return ",".join(cells)


def parse_selection_line(line: str) -> tuple[str, float, str, list[int]]:
    cells = line.rstrip("\n").split(",")
    if len(cells) < 3:
        raise DomainError(f"malformed selection line: {line!r}")
    batch_id, p_text, seed_digest = cells[0], cells[1], cells[2]
    try:
        p = float(p_text)
        indices = [int(c) for c in cells[3:] if c != ""]
    except ValueError as exc:
        raise DomainError(f"malformed selection line: {line!r}") from exc
    return batch_id, p, seed_digest, indices
