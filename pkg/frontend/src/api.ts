/**
 * Typed client for the audit service's /v1 API.
 *
 * Every response is enveloped as {data, head} where head is the digest of
 * the session event log at response time; callers keep the head so stale
 * panels are detectable. Errors arrive as {error: {code, message}} and are
 * thrown as ApiError. The console performs no statistical computation:
 * everything rendered comes out of these payloads verbatim.
 */

export interface Envelope<T> {
  data: T;
  head: string;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  invariant?: string;
}

export class ApiError extends Error {
  readonly code: string;
  readonly invariant?: string;
  readonly status: number;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.code = body.code;
    this.invariant = body.invariant;
    this.status = status;
  }
}

/** Thrown when the service cannot be reached at all (offline). */
export class OfflineError extends Error {
  readonly cause: unknown;

  constructor(cause: unknown) {
    super("audit service unreachable");
    this.cause = cause;
  }
}

export interface SessionSummary {
  session_id: string;
  phase: string;
  contest: {
    contest_id: string;
    jurisdiction: string;
    candidates: string[];
    seats: number;
  };
  level: number;
  batches: {
    batch_id: string;
    size: number;
    commitment: string;
    committed_at: string;
    selections_drawn: boolean;
  }[];
  turnout: Record<string, number>;
}

export interface SelectionRef {
  batch_id: string;
  ballot_index: number;
  stage: 1 | 2;
  read: boolean;
}

export interface BallotDetail {
  batch_id: string;
  ballot_index: number;
  origin: string;
  digitised: Record<string, number>;
  candidates: string[];
}

export type RankDiff = [string, number | null, number | null];

export interface Discrepancy {
  batch_id: string;
  ballot_index: number;
  digitised: Record<string, number>;
  human_read: Record<string, number>;
  rank_diffs: RankDiff[];
}

export interface Tallies {
  inspected: number;
  with_error: number;
  rank_discrepancies: number;
}

export interface ReadingResult {
  discrepancy: Discrepancy | null;
  tallies: Tallies;
}

export interface IntervalDto {
  lower: number;
  upper: number;
  level: number;
  method: string;
}

export interface MarginDto {
  kind: string;
  vote_changes: number;
  effect: string;
  source: string;
}

export interface ConclusionDto {
  scenario: string;
  ci: { lower: number; upper: number };
  ci_counts: [number, number];
  margin_votes: number;
  recommendation: string;
}

export interface LiveStats {
  phase: string;
  tallies: Tallies;
  ci: IntervalDto | null;
  ci_counts: [number, number] | null;
  cast_ballots: number;
  margin: MarginDto | null;
  scenario: string | null;
  conclusion: ConclusionDto | null;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface ApiClientOptions {
  baseUrl: string;
  token: string;
  fetchImpl?: FetchLike;
}

let idempotencyCounter = 0;

/** Fresh idempotency key; a retry of the same logical action reuses one. */
export function newIdempotencyKey(): string {
  idempotencyCounter += 1;
  return `console-${Date.now()}-${idempotencyCounter}`;
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly token: string;
  private readonly fetchImpl: FetchLike;

  constructor(options: ApiClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/$/, "");
    this.token = options.token;
    this.fetchImpl = options.fetchImpl ?? fetch.bind(globalThis);
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    idempotencyKey?: string,
  ): Promise<Envelope<T>> {
    const headers: Record<string, string> = { "X-Audit-Token": this.token };
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (idempotencyKey) headers["X-Idempotency-Key"] = idempotencyKey;
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, {
        method,
        headers,
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (cause) {
      throw new OfflineError(cause);
    }
    const payload = await response.json();
    if (!response.ok || payload.error) {
      throw new ApiError(response.status, payload.error ?? {
        code: "unknown",
        message: `unexpected ${response.status}`,
      });
    }
    return payload as Envelope<T>;
  }

  getSession(sessionId: string): Promise<Envelope<SessionSummary>> {
    return this.request("GET", `/v1/sessions/${sessionId}`);
  }

  getSelections(sessionId: string): Promise<Envelope<{ selections: SelectionRef[] }>> {
    return this.request("GET", `/v1/sessions/${sessionId}/selections`);
  }

  getBallot(
    sessionId: string,
    batchId: string,
    ballotIndex: number,
  ): Promise<Envelope<BallotDetail>> {
    return this.request(
      "GET",
      `/v1/sessions/${sessionId}/ballots/${batchId}/${ballotIndex}`,
    );
  }

  getStats(sessionId: string): Promise<Envelope<LiveStats>> {
    return this.request("GET", `/v1/sessions/${sessionId}/stats`);
  }

  submitReading(
    sessionId: string,
    reading: {
      batch_id: string;
      ballot_index: number;
      rankings: Record<string, number>;
      operator: string;
      correction?: boolean;
    },
    idempotencyKey: string,
  ): Promise<Envelope<ReadingResult>> {
    return this.request(
      "POST",
      `/v1/sessions/${sessionId}/readings`,
      reading,
      idempotencyKey,
    );
  }

  escalateSecondPass(
    sessionId: string,
    target: number,
    idempotencyKey: string,
  ): Promise<Envelope<{ target: number; p: number; population: number }>> {
    return this.request(
      "POST",
      `/v1/sessions/${sessionId}/second-pass`,
      { target },
      idempotencyKey,
    );
  }
}
