/**
 * In-memory fixture of the audit service's /v1 surface, exposed as a
 * FetchLike. It mirrors the real service's observable behaviour:
 * enveloped responses with a moving log head, role enforcement,
 * selection enforcement, idempotency keys, and rank-diff computation.
 *
 * Statistics are canned: the fixture returns whatever interval/margin/
 * scenario it was configured with, which doubles as the proof that the
 * console renders service numbers verbatim instead of computing its own.
 */

import type { FetchLike, LiveStats, RankDiff } from "../src/api";

export interface FixtureBallot {
  origin: string;
  digitised: Record<string, number>;
}

export interface FixtureConfig {
  sessionId: string;
  officialToken: string;
  scrutineerToken: string;
  candidates: string[];
  ballots: Record<string, FixtureBallot[]>; // batch id -> ballots
  selections: { batch_id: string; ballot_index: number; stage: 1 | 2 }[];
  stats: Partial<LiveStats>;
}

interface StoredReading {
  rankings: Record<string, number>;
  diffs: RankDiff[];
}

export class FixtureService {
  readonly config: FixtureConfig;
  head: string;
  eventCount = 0;
  readings = new Map<string, StoredReading>();
  idempotency = new Map<string, unknown>();
  secondPassRequests: number[] = [];
  /** When true every request rejects like a dead network. */
  offline = false;

  constructor(config: FixtureConfig) {
    this.config = config;
    this.head = "head-0000";
  }

  private bump(): void {
    this.eventCount += 1;
    this.head = `head-${String(this.eventCount).padStart(4, "0")}`;
  }

  private envelope(data: unknown): Response {
    return jsonResponse(200, { data, head: this.head });
  }

  private error(status: number, code: string, message: string, invariant?: string): Response {
    const body: Record<string, unknown> = { code, message };
    if (invariant) body.invariant = invariant;
    return jsonResponse(status, { error: body });
  }

  fetch: FetchLike = async (input, init) => {
    if (this.offline) throw new TypeError("fetch failed (fixture offline)");
    const url = new URL(input, "http://fixture.local");
    const method = init?.method ?? "GET";
    const headers = (init?.headers ?? {}) as Record<string, string>;
    const token = headers["X-Audit-Token"];

    const role =
      token === this.config.officialToken
        ? "official"
        : token === this.config.scrutineerToken
          ? "scrutineer"
          : null;
    if (role === null) {
      return this.error(401, "unauthorized", "unrecognized session token");
    }
    if (method !== "GET" && role !== "official") {
      return this.error(403, "forbidden_role", "scrutineer tokens are read-only");
    }

    const base = `/v1/sessions/${this.config.sessionId}`;
    const path = url.pathname;

    if (method === "GET" && path === base) {
      return this.envelope({
        session_id: this.config.sessionId,
        phase: "batch_processing",
        contest: {
          contest_id: "FIX",
          jurisdiction: "Fixtureland",
          candidates: this.config.candidates,
          seats: 1,
        },
        level: 0.95,
        batches: Object.entries(this.config.ballots).map(([batchId, ballots]) => ({
          batch_id: batchId,
          size: ballots.length,
          commitment: "c".repeat(64),
          committed_at: "2026-07-01T00:00:01Z",
          selections_drawn: true,
        })),
        turnout: {},
      });
    }

    if (method === "GET" && path === `${base}/selections`) {
      return this.envelope({
        selections: this.config.selections.map((ref) => ({
          ...ref,
          read: this.readings.has(`${ref.batch_id}:${ref.ballot_index}`),
        })),
      });
    }

    const ballotMatch = path.match(
      new RegExp(`^${base}/ballots/([^/]+)/(\\d+)$`),
    );
    if (method === "GET" && ballotMatch) {
      const [, batchId, indexText] = ballotMatch;
      const ballot = this.config.ballots[batchId!]?.[Number(indexText)];
      if (!ballot) {
        return this.error(400, "domain_error", `no ballot ${batchId}[${indexText}]`);
      }
      return this.envelope({
        batch_id: batchId,
        ballot_index: Number(indexText),
        origin: ballot.origin,
        digitised: ballot.digitised,
        candidates: this.config.candidates,
      });
    }

    if (method === "GET" && path === `${base}/stats`) {
      const inspected = this.readings.size;
      let withError = 0;
      let rankDiscrepancies = 0;
      for (const reading of this.readings.values()) {
        if (reading.diffs.length > 0) withError += 1;
        rankDiscrepancies += reading.diffs.length;
      }
      const stats: LiveStats = {
        phase: "batch_processing",
        tallies: {
          inspected,
          with_error: withError,
          rank_discrepancies: rankDiscrepancies,
        },
        ci: null,
        ci_counts: null,
        cast_ballots: 100,
        margin: null,
        scenario: null,
        conclusion: null,
        ...this.config.stats,
      };
      return this.envelope(stats);
    }

    if (method === "POST" && path === `${base}/readings`) {
      const key = headers["X-Idempotency-Key"];
      if (key && this.idempotency.has(key)) {
        return jsonResponse(200, this.idempotency.get(key));
      }
      const body = JSON.parse(String(init?.body ?? "{}"));
      const refKey = `${body.batch_id}:${body.ballot_index}`;
      const isSelected = this.config.selections.some(
        (s) => s.batch_id === body.batch_id && s.ballot_index === body.ballot_index,
      );
      if (!isSelected) {
        return this.error(
          422,
          "unselected_ballot",
          `ballot ${refKey} was not selected by the sampler`,
          "unselected_ballot",
        );
      }
      const ballot = this.config.ballots[body.batch_id]?.[body.ballot_index];
      if (!ballot) return this.error(400, "domain_error", `no ballot ${refKey}`);
      const diffs = rankDifferences(ballot.digitised, body.rankings);
      this.readings.set(refKey, { rankings: body.rankings, diffs });
      this.bump();
      const payload = {
        data: {
          discrepancy:
            diffs.length === 0
              ? null
              : {
                  batch_id: body.batch_id,
                  ballot_index: body.ballot_index,
                  digitised: ballot.digitised,
                  human_read: body.rankings,
                  rank_diffs: diffs,
                },
          tallies: {
            inspected: this.readings.size,
            with_error: [...this.readings.values()].filter((r) => r.diffs.length).length,
            rank_discrepancies: [...this.readings.values()].reduce(
              (sum, r) => sum + r.diffs.length,
              0,
            ),
          },
        },
        head: this.head,
      };
      if (key) this.idempotency.set(key, payload);
      return jsonResponse(200, payload);
    }

    if (method === "POST" && path === `${base}/second-pass`) {
      const body = JSON.parse(String(init?.body ?? "{}"));
      this.secondPassRequests.push(body.target);
      this.bump();
      return this.envelope({ target: body.target, p: 0.01, population: 100 });
    }

    return this.error(400, "domain_error", `unhandled route ${method} ${path}`);
  };
}

function rankDifferences(
  digitised: Record<string, number>,
  human: Record<string, number>,
): RankDiff[] {
  const names = [...new Set([...Object.keys(digitised), ...Object.keys(human)])].sort();
  const diffs: RankDiff[] = [];
  for (const name of names) {
    const a = digitised[name] ?? null;
    const b = human[name] ?? null;
    if (a !== b) diffs.push([name, a, b]);
  }
  return diffs;
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/** A ready-to-use fixture: one batch, three candidates, two selections. */
export function standardFixture(stats: Partial<LiveStats> = {}): FixtureService {
  return new FixtureService({
    sessionId: "s-fixture",
    officialToken: "official-token",
    scrutineerToken: "scrutineer-token",
    candidates: ["ALPHA", "BRAVO", "CHARLIE"],
    ballots: {
      B1: [
        { origin: "booth-1", digitised: { ALPHA: 1, BRAVO: 2 } },
        { origin: "booth-1", digitised: { BRAVO: 1, CHARLIE: 2 } },
        { origin: "booth-2", digitised: { CHARLIE: 1 } },
        { origin: "booth-2", digitised: { ALPHA: 1, BRAVO: 2, CHARLIE: 3 } },
      ],
    },
    selections: [
      { batch_id: "B1", ballot_index: 1, stage: 1 },
      { batch_id: "B1", ballot_index: 3, stage: 1 },
    ],
    stats,
  });
}
