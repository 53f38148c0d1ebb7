/**
 * Console view state: a single plain object plus subscribe/update.
 *
 * The server is authoritative; this store only mirrors what the API last
 * returned, tagged with the log-head digest it arrived under. The entry
 * form may only target the head of the pending queue or a ballot the
 * operator explicitly picked from the selection list — never an
 * arbitrary index.
 */

import type {
  BallotDetail,
  Discrepancy,
  LiveStats,
  SelectionRef,
  SessionSummary,
} from "./api";

export type Role = "official" | "scrutineer";

export interface ConsoleViewState {
  connected: boolean;
  offline: boolean;
  role: Role;
  session: SessionSummary | null;
  selections: SelectionRef[];
  selectionsHead: string;
  /** Ballot currently open in the entry form, with its digitised ranks. */
  activeBallot: BallotDetail | null;
  /** Diff returned by the service for the last submitted reading. */
  lastDiscrepancy: Discrepancy | null;
  lastReadingClean: boolean;
  stats: LiveStats | null;
  /** Log-head digest the displayed stats were computed at. */
  statsHead: string;
  toast: string | null;
}

export function initialState(role: Role): ConsoleViewState {
  return {
    connected: false,
    offline: false,
    role,
    session: null,
    selections: [],
    selectionsHead: "",
    activeBallot: null,
    lastDiscrepancy: null,
    lastReadingClean: false,
    stats: null,
    statsHead: "",
    toast: null,
  };
}

export type Listener = (state: ConsoleViewState) => void;

export class Store {
  private state: ConsoleViewState;
  private listeners: Listener[] = [];

  constructor(role: Role) {
    this.state = initialState(role);
  }

  get(): ConsoleViewState {
    return this.state;
  }

  update(patch: Partial<ConsoleViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    listener(this.state);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }
}

/** Selections not yet read, in retrieval order (stage 1 before stage 2). */
export function pendingSelections(state: ConsoleViewState): SelectionRef[] {
  return state.selections.filter((s) => !s.read);
}

/** The ballot the entry form should offer next. */
export function queueHead(state: ConsoleViewState): SelectionRef | null {
  return pendingSelections(state)[0] ?? null;
}

/**
 * Whether the entry form may open this ballot: it must be one of the
 * sampler's selections (the service would refuse anything else anyway;
 * the console does not even offer it).
 */
export function isSelected(
  state: ConsoleViewState,
  batchId: string,
  ballotIndex: number,
): boolean {
  return state.selections.some(
    (s) => s.batch_id === batchId && s.ballot_index === ballotIndex,
  );
}
