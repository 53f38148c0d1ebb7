/**
 * Rank entry grid: one numeric input per candidate, laid out like the
 * paper ballot the operator is transcribing from.
 *
 * Validation philosophy: non-integer or non-positive text is a hard
 * error (it cannot be represented as a rank at all), but duplicated or
 * skipped rank numbers are only *warnings* — ambiguous marks are
 * legitimate audit data and must be enterable exactly as seen.
 */

export interface RankEntry {
  rankings: Record<string, number>;
  warnings: string[];
  errors: string[];
}

/** Parse the grid's raw cell texts into a rank map plus findings. */
export function parseRankEntries(cells: Record<string, string>): RankEntry {
  const rankings: Record<string, number> = {};
  const warnings: string[] = [];
  const errors: string[] = [];
  for (const [candidate, raw] of Object.entries(cells)) {
    const text = raw.trim();
    if (text === "") continue;
    if (!/^\d+$/.test(text) || Number(text) < 1) {
      errors.push(`${candidate}: "${text}" is not a positive whole number`);
      continue;
    }
    rankings[candidate] = Number(text);
  }
  const seen = new Map<number, string[]>();
  for (const [candidate, rank] of Object.entries(rankings)) {
    const holders = seen.get(rank) ?? [];
    holders.push(candidate);
    seen.set(rank, holders);
  }
  for (const [rank, holders] of [...seen.entries()].sort((a, b) => a[0] - b[0])) {
    if (holders.length > 1) {
      warnings.push(`rank ${rank} appears on ${holders.join(" and ")}`);
    }
  }
  const ranks = [...seen.keys()].sort((a, b) => a - b);
  for (let expected = 1, i = 0; i < ranks.length; i++, expected++) {
    const rank = ranks[i]!;
    if (rank !== expected) {
      warnings.push(`rank ${expected} is missing (next mark is ${rank})`);
      expected = rank;
    }
  }
  return { rankings, warnings, errors };
}

export interface EntryFormHandles {
  root: HTMLElement;
  inputs: Map<string, HTMLInputElement>;
  warningsBox: HTMLElement;
  submitButton: HTMLButtonElement;
}

/** Build the candidate/rank grid for one ballot. */
export function renderEntryForm(
  candidates: string[],
  options: {
    readOnly: boolean;
    onSubmit: (cells: Record<string, string>) => void;
  },
): EntryFormHandles {
  const root = document.createElement("form");
  root.className = "entry-form";
  root.addEventListener("submit", (event) => event.preventDefault());

  const grid = document.createElement("div");
  grid.className = "entry-grid";
  const inputs = new Map<string, HTMLInputElement>();
  for (const candidate of candidates) {
    const row = document.createElement("label");
    row.className = "entry-row";
    const name = document.createElement("span");
    name.textContent = candidate;
    const input = document.createElement("input");
    input.type = "text";
    input.inputMode = "numeric";
    input.autocomplete = "off";
    input.dataset.candidate = candidate;
    input.disabled = options.readOnly;
    inputs.set(candidate, input);
    row.append(name, input);
    grid.append(row);
  }

  const warningsBox = document.createElement("div");
  warningsBox.className = "entry-warnings";

  const submitButton = document.createElement("button");
  submitButton.type = "submit";
  submitButton.textContent = "Record reading";
  submitButton.disabled = options.readOnly;
  if (options.readOnly) submitButton.hidden = true;

  const collect = (): Record<string, string> => {
    const cells: Record<string, string> = {};
    for (const [candidate, input] of inputs) cells[candidate] = input.value;
    return cells;
  };

  const refreshFindings = () => {
    const entry = parseRankEntries(collect());
    warningsBox.replaceChildren();
    for (const problem of entry.errors) {
      const line = document.createElement("p");
      line.className = "entry-error";
      line.textContent = problem;
      warningsBox.append(line);
    }
    for (const warning of entry.warnings) {
      const line = document.createElement("p");
      line.className = "entry-warning";
      line.textContent = `⚠ ${warning} — enter exactly what the paper shows`;
      warningsBox.append(line);
    }
    // Warnings never block submission; hard errors do.
    submitButton.disabled = options.readOnly || entry.errors.length > 0;
  };
  for (const input of inputs.values()) {
    input.addEventListener("input", refreshFindings);
  }

  root.addEventListener("submit", () => {
    if (options.readOnly) return;
    const entry = parseRankEntries(collect());
    if (entry.errors.length > 0) return;
    options.onSubmit(collect());
  });

  root.append(grid, warningsBox, submitButton);
  return { root, inputs, warningsBox, submitButton };
}
