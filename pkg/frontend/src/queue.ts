/**
 * Selection queue: the ballots the sampler picked, in retrieval order,
 * labelled with their batch and box provenance so the runner can fetch
 * the right paper.
 */

import type { SelectionRef } from "./api";

export interface QueueOptions {
  onOpen: (ref: SelectionRef) => void;
  readOnly: boolean;
}

export function renderSelectionQueue(
  selections: SelectionRef[],
  options: QueueOptions,
): HTMLElement {
  const section = document.createElement("section");
  section.className = "selection-queue";

  const pending = selections.filter((s) => !s.read);
  const heading = document.createElement("h2");
  heading.textContent = `Ballots to retrieve (${pending.length} pending of ${selections.length})`;
  section.append(heading);

  if (selections.length === 0) {
    const empty = document.createElement("p");
    empty.className = "queue-empty";
    empty.textContent = "No ballots selected from this batch.";
    section.append(empty);
    return section;
  }

  const list = document.createElement("ol");
  list.className = "queue-list";
  for (const ref of selections) {
    const item = document.createElement("li");
    item.dataset.batch = ref.batch_id;
    item.dataset.index = String(ref.ballot_index);
    item.className = ref.read ? "queue-item read" : "queue-item pending";
    const label = document.createElement("span");
    label.textContent =
      `${ref.batch_id} · ballot ${ref.ballot_index}` +
      (ref.stage === 2 ? " · second pass" : "");
    item.append(label);
    if (!options.readOnly && !ref.read) {
      const open = document.createElement("button");
      open.type = "button";
      open.textContent = "Enter reading";
      open.addEventListener("click", () => options.onOpen(ref));
      item.append(open);
    }
    if (ref.read) {
      const done = document.createElement("span");
      done.className = "queue-done";
      done.textContent = " ✓ read";
      item.append(done);
    }
    list.append(item);
  }
  section.append(list);
  return section;
}

export function renderOfflineBanner(): HTMLElement {
  const banner = document.createElement("div");
  banner.className = "offline-banner";
  banner.textContent =
    "Audit service unreachable. Nothing is cached or queued: re-enter the " +
    "reading once the connection returns.";
  return banner;
}
