/**
 * Top-level console wiring.
 *
 * The server is authoritative: nothing is shown as recorded until the
 * service acknowledges it (no optimistic updates — the event log is the
 * legal record), and a network retry reuses the same idempotency key so
 * the log gains exactly one event. In scrutineer mode every mutating
 * affordance is hidden; the service would refuse them anyway.
 */

import {
  ApiClient,
  ApiError,
  OfflineError,
  newIdempotencyKey,
  type SelectionRef,
} from "./api";
import { renderDiff, renderNoDiscrepancy } from "./diff";
import { parseRankEntries, renderEntryForm } from "./entry";
import { renderOfflineBanner, renderSelectionQueue } from "./queue";
import { renderStatsPanel } from "./stats";
import { Store, queueHead, isSelected, type Role } from "./state";

export interface ConsoleOptions {
  root: HTMLElement;
  client: ApiClient;
  sessionId: string;
  role: Role;
  operator: string;
}

export class AuditConsole {
  readonly store: Store;
  private readonly root: HTMLElement;
  private readonly client: ApiClient;
  private readonly sessionId: string;
  private readonly operator: string;
  /** Idempotency key for the in-flight reading; reused on retry. */
  private pendingReadingKey: string | null = null;

  constructor(options: ConsoleOptions) {
    this.root = options.root;
    this.client = options.client;
    this.sessionId = options.sessionId;
    this.operator = options.operator;
    this.store = new Store(options.role);
    this.store.subscribe(() => this.render());
  }

  async connect(): Promise<void> {
    try {
      const session = await this.client.getSession(this.sessionId);
      this.store.update({
        connected: true,
        offline: false,
        session: session.data,
      });
      await this.refreshSelections();
      await this.refreshStats();
    } catch (error) {
      if (error instanceof OfflineError) {
        this.store.update({ offline: true, connected: false });
        return;
      }
      throw error;
    }
  }

  async refreshSelections(): Promise<void> {
    try {
      const selections = await this.client.getSelections(this.sessionId);
      this.store.update({
        offline: false,
        selections: selections.data.selections,
        selectionsHead: selections.head,
      });
    } catch (error) {
      if (error instanceof OfflineError) {
        this.store.update({ offline: true });
        return;
      }
      throw error;
    }
  }

  async refreshStats(): Promise<void> {
    try {
      const stats = await this.client.getStats(this.sessionId);
      this.store.update({
        offline: false,
        stats: stats.data,
        statsHead: stats.head,
      });
    } catch (error) {
      if (error instanceof OfflineError) {
        this.store.update({ offline: true });
        return;
      }
      throw error;
    }
  }

  /** Open a ballot in the entry form (queue head or an explicit pick). */
  async openBallot(ref: SelectionRef): Promise<void> {
    if (!isSelected(this.store.get(), ref.batch_id, ref.ballot_index)) {
      this.store.update({
        toast: `ballot ${ref.batch_id}[${ref.ballot_index}] is not among the sampler's selections`,
      });
      return;
    }
    const ballot = await this.client.getBallot(
      this.sessionId,
      ref.batch_id,
      ref.ballot_index,
    );
    this.pendingReadingKey = null;
    this.store.update({
      activeBallot: ballot.data,
      lastDiscrepancy: null,
      lastReadingClean: false,
      toast: null,
    });
  }

  async openQueueHead(): Promise<void> {
    const head = queueHead(this.store.get());
    if (head) await this.openBallot(head);
  }

  /**
   * Submit the entry form. The idempotency key is created once per
   * logical reading and reused across retries, so a flaky network cannot
   * duplicate the event.
   */
  async submitReading(cells: Record<string, string>): Promise<void> {
    const state = this.store.get();
    const ballot = state.activeBallot;
    if (!ballot || state.role !== "official") return;
    const entry = parseRankEntries(cells);
    if (entry.errors.length > 0) {
      this.store.update({ toast: entry.errors.join("; ") });
      return;
    }
    if (this.pendingReadingKey === null) {
      this.pendingReadingKey = newIdempotencyKey();
    }
    try {
      const result = await this.client.submitReading(
        this.sessionId,
        {
          batch_id: ballot.batch_id,
          ballot_index: ballot.ballot_index,
          rankings: entry.rankings,
          operator: this.operator,
        },
        this.pendingReadingKey,
      );
      this.pendingReadingKey = null;
      this.store.update({
        lastDiscrepancy: result.data.discrepancy,
        lastReadingClean: result.data.discrepancy === null,
        toast: null,
      });
      await this.refreshSelections();
      await this.refreshStats();
    } catch (error) {
      if (error instanceof OfflineError) {
        // Keep pendingReadingKey: the retry must reuse it.
        this.store.update({ offline: true });
        return;
      }
      if (error instanceof ApiError) {
        this.pendingReadingKey = null;
        const invariant = error.invariant ? ` [${error.invariant}]` : "";
        this.store.update({ toast: `${error.message}${invariant}` });
        return;
      }
      throw error;
    }
  }

  async requestSecondPass(target: number): Promise<void> {
    if (this.store.get().role !== "official") return;
    try {
      await this.client.escalateSecondPass(
        this.sessionId,
        target,
        newIdempotencyKey(),
      );
      await this.refreshSelections();
      await this.refreshStats();
    } catch (error) {
      if (error instanceof ApiError) {
        this.store.update({ toast: error.message });
        return;
      }
      throw error;
    }
  }

  render(): void {
    const state = this.store.get();
    this.root.replaceChildren();

    if (state.offline) {
      this.root.append(renderOfflineBanner());
    }
    if (state.toast) {
      const toast = document.createElement("div");
      toast.className = "toast-error";
      toast.setAttribute("role", "alert");
      toast.textContent = state.toast;
      this.root.append(toast);
    }
    if (!state.session) return;

    const header = document.createElement("header");
    header.className = "console-header";
    const title = document.createElement("h1");
    title.textContent = `${state.session.contest.jurisdiction} — digitisation audit`;
    const phase = document.createElement("span");
    phase.className = "phase-chip";
    phase.textContent = state.session.phase;
    const role = document.createElement("span");
    role.className = `role-chip role-${state.role}`;
    role.textContent = state.role === "official" ? "official" : "scrutineer (read-only)";
    header.append(title, phase, role);
    this.root.append(header);

    this.root.append(
      renderSelectionQueue(state.selections, {
        readOnly: state.role !== "official",
        onOpen: (ref) => void this.openBallot(ref),
      }),
    );

    if (state.activeBallot) {
      const section = document.createElement("section");
      section.className = "entry-section";
      const heading = document.createElement("h2");
      heading.textContent =
        `Reading ${state.activeBallot.batch_id} · ballot ` +
        `${state.activeBallot.ballot_index} (${state.activeBallot.origin})`;
      section.append(heading);
      const form = renderEntryForm(state.activeBallot.candidates, {
        readOnly: state.role !== "official",
        onSubmit: (cells) => void this.submitReading(cells),
      });
      section.append(form.root);
      this.root.append(section);
    }

    if (state.lastDiscrepancy && state.activeBallot) {
      this.root.append(
        renderDiff(state.activeBallot.candidates, state.lastDiscrepancy),
      );
    } else if (state.lastReadingClean) {
      this.root.append(renderNoDiscrepancy());
    }

    this.root.append(
      renderStatsPanel(state.stats, state.statsHead, {
        role: state.role,
        onSecondPass: () => {
          const input = window.prompt("Second-pass target sample size?", "625");
          const target = input ? Number(input) : NaN;
          if (Number.isInteger(target) && target > 0) {
            void this.requestSecondPass(target);
          }
        },
      }),
    );
  }
}
