/**
 * Live statistics panel: error tallies, the scaled confidence interval
 * drawn against the apparent-margin line, the scenario banner, and the
 * second-pass call to action (enabled only when the scenario is
 * inconclusive).
 *
 * Every number is rendered verbatim from the stats payload; the panel
 * also shows the log-head digest the numbers were computed at, so an
 * operator can tell at a glance whether two screens are in sync.
 */

import type { LiveStats } from "./api";

export const SCENARIO_LABELS: Record<string, string> = {
  low_enough: "Errors unlikely to have altered the outcome",
  too_high: "Error rate exceeds the apparent margin — investigate",
  inconclusive: "Inconclusive — more auditing needed",
};

export interface StatsPanelOptions {
  role: "official" | "scrutineer";
  onSecondPass?: () => void;
}

export function renderStatsPanel(
  stats: LiveStats | null,
  head: string,
  options: StatsPanelOptions,
): HTMLElement {
  const panel = document.createElement("section");
  panel.className = "stats-panel";

  if (stats === null) {
    const empty = document.createElement("p");
    empty.className = "stats-empty";
    empty.textContent = "No statistics yet.";
    panel.append(empty);
    return panel;
  }

  const tallies = document.createElement("p");
  tallies.className = "stats-tallies";
  tallies.textContent =
    `${stats.tallies.inspected} ballots inspected · ` +
    `${stats.tallies.with_error} with a discrepancy · ` +
    `${stats.tallies.rank_discrepancies} rank differences`;
  panel.append(tallies);

  if (stats.ci) {
    const ci = document.createElement("p");
    ci.className = "stats-ci";
    const pct = (x: number) => `${(100 * x).toFixed(2)}%`;
    ci.textContent =
      `${Math.round(stats.ci.level * 100)}% interval (${stats.ci.method}): ` +
      `${pct(stats.ci.lower)} – ${pct(stats.ci.upper)}`;
    panel.append(ci);
  }

  if (stats.ci_counts && stats.margin) {
    panel.append(renderIntervalChart(stats.ci_counts, stats.margin.vote_changes));
    const counts = document.createElement("p");
    counts.className = "stats-counts";
    counts.textContent =
      `${stats.ci_counts[0].toLocaleString()} – ${stats.ci_counts[1].toLocaleString()} ` +
      `ballots with errors vs apparent margin ${stats.margin.vote_changes.toLocaleString()}`;
    panel.append(counts);
  } else if (!stats.margin) {
    const pending = document.createElement("p");
    pending.className = "margin-pending";
    pending.textContent = "Apparent margin pending — scenario unavailable.";
    panel.append(pending);
  }

  const banner = document.createElement("div");
  banner.className = "scenario-banner";
  if (stats.scenario) {
    banner.dataset.scenario = stats.scenario;
    banner.textContent = SCENARIO_LABELS[stats.scenario] ?? stats.scenario;
  } else {
    banner.dataset.scenario = "pending";
    banner.textContent = "Scenario pending";
  }
  panel.append(banner);

  if (stats.conclusion) {
    const recommendation = document.createElement("p");
    recommendation.className = "stats-recommendation";
    recommendation.textContent = stats.conclusion.recommendation;
    panel.append(recommendation);
  }

  if (stats.scenario === "inconclusive" && options.role === "official") {
    const cta = document.createElement("button");
    cta.type = "button";
    cta.className = "second-pass-cta";
    cta.textContent = "Plan second sampling pass";
    cta.addEventListener("click", () => options.onSecondPass?.());
    panel.append(cta);
  }

  const headLine = document.createElement("p");
  headLine.className = "stats-head";
  headLine.textContent = `log head ${head.slice(0, 12)}…`;
  headLine.title = head;
  panel.append(headLine);

  return panel;
}

/**
 * Interval-vs-margin strip: interval bar plus a margin tick, scaled to
 * whichever of the two is larger. Pure presentation — positions derive
 * from the already-computed counts.
 */
export function renderIntervalChart(
  ciCounts: [number, number],
  marginVotes: number,
): HTMLElement {
  const [lower, upper] = ciCounts;
  const axisMax = Math.max(upper, marginVotes) * 1.15 || 1;
  const x = (value: number) => (100 * value) / axisMax;

  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", "0 0 100 12");
  svg.setAttribute("class", "interval-chart");
  svg.setAttribute("role", "img");
  svg.setAttribute(
    "aria-label",
    `confidence interval ${lower} to ${upper} ballots, apparent margin ${marginVotes}`,
  );

  const axis = document.createElementNS(svg.namespaceURI, "line");
  axis.setAttribute("x1", "0");
  axis.setAttribute("x2", "100");
  axis.setAttribute("y1", "8");
  axis.setAttribute("y2", "8");
  axis.setAttribute("class", "chart-axis");
  svg.append(axis);

  const bar = document.createElementNS(svg.namespaceURI, "rect");
  bar.setAttribute("x", String(x(lower)));
  bar.setAttribute("width", String(Math.max(x(upper) - x(lower), 0.5)));
  bar.setAttribute("y", "5.5");
  bar.setAttribute("height", "5");
  bar.setAttribute("class", "chart-interval");
  svg.append(bar);

  const margin = document.createElementNS(svg.namespaceURI, "line");
  margin.setAttribute("x1", String(x(marginVotes)));
  margin.setAttribute("x2", String(x(marginVotes)));
  margin.setAttribute("y1", "2");
  margin.setAttribute("y2", "11");
  margin.setAttribute("class", "chart-margin");
  svg.append(margin);

  return svg as unknown as HTMLElement;
}
