/**
 * Side-by-side rendering of digitised vs human-read ranks.
 *
 * The rows come straight from the service's rank_diffs plus the agreed
 * candidates; the console adds no interpretation of its own.
 */

import type { Discrepancy } from "./api";

export function renderDiff(
  candidates: string[],
  discrepancy: Discrepancy,
): HTMLElement {
  const table = document.createElement("table");
  table.className = "diff-table";
  const head = document.createElement("tr");
  for (const text of ["Candidate", "Digitised", "Human reading"]) {
    const cell = document.createElement("th");
    cell.textContent = text;
    head.append(cell);
  }
  table.append(head);

  const differing = new Set(discrepancy.rank_diffs.map(([candidate]) => candidate));
  for (const candidate of candidates) {
    const row = document.createElement("tr");
    row.dataset.candidate = candidate;
    if (differing.has(candidate)) row.className = "diff-mismatch";
    const name = document.createElement("td");
    name.textContent = candidate;
    const digitised = document.createElement("td");
    digitised.textContent = formatRank(discrepancy.digitised[candidate]);
    const human = document.createElement("td");
    human.textContent = formatRank(discrepancy.human_read[candidate]);
    row.append(name, digitised, human);
    table.append(row);
  }
  return table;
}

export function renderNoDiscrepancy(): HTMLElement {
  const box = document.createElement("p");
  box.className = "diff-clean";
  box.textContent = "No discrepancy: the human reading matches the digitised preferences.";
  return box;
}

function formatRank(rank: number | undefined): string {
  return rank === undefined ? "—" : String(rank);
}
