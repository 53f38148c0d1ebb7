/**
 * End-to-end console flows against the fixture service: the operator
 * path (select → retrieve → enter reading → see diff → see scenario
 * banner) and the scrutineer read-only guarantees.
 */

import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api";
import { AuditConsole } from "../src/console";
import { standardFixture, type FixtureService } from "./fixture";

function mountConsole(fixture: FixtureService, token: string) {
  const root = document.createElement("div");
  document.body.append(root);
  const consoleApp = new AuditConsole({
    root,
    client: new ApiClient({
      baseUrl: "http://fixture.local",
      token,
      fetchImpl: fixture.fetch,
    }),
    sessionId: "s-fixture",
    role: token.startsWith("scrutineer") ? "scrutineer" : "official",
    operator: "tester",
  });
  return { root, consoleApp };
}

const fillInput = (root: HTMLElement, candidate: string, value: string) => {
  const input = root.querySelector<HTMLInputElement>(
    `input[data-candidate="${candidate}"]`,
  )!;
  input.value = value;
  input.dispatchEvent(new Event("input", { bubbles: true }));
};

beforeEach(() => {
  document.body.replaceChildren();
});

describe("operator flow", () => {
  it("select -> retrieve -> enter reading -> diff -> scenario banner", async () => {
    const fixture = standardFixture({
      ci: { lower: 0.0041, upper: 0.0086, level: 0.95, method: "clopper_pearson" },
      ci_counts: [15669, 32866],
      margin: { kind: "external", vote_changes: 9341, effect: "", source: "ext" },
      scenario: "too_high",
    });
    const { root, consoleApp } = mountConsole(fixture, "official-token");
    await consoleApp.connect();

    // Queue lists both selections with batch/box provenance, none read.
    const items = [...root.querySelectorAll(".queue-item")];
    expect(items).toHaveLength(2);
    expect(root.querySelector(".selection-queue h2")!.textContent).toContain(
      "2 pending of 2",
    );
    expect(items[0]!.textContent).toContain("B1 · ballot 1");

    // Retrieve the queue head: entry form opens on the selected ballot.
    await consoleApp.openQueueHead();
    expect(root.querySelector(".entry-section h2")!.textContent).toContain(
      "B1 · ballot 1 (booth-1)",
    );

    // Enter a reading that differs from the digitised ranks
    // (digitised: BRAVO=1, CHARLIE=2; human: ALPHA=1, CHARLIE=2).
    fillInput(root, "ALPHA", "1");
    fillInput(root, "CHARLIE", "2");
    root.querySelector("form")!.dispatchEvent(new Event("submit"));
    await vi.waitFor(() => {
      expect(root.querySelector(".diff-table")).not.toBeNull();
    });

    // The diff highlights exactly the candidates the service reported.
    const mismatches = [...root.querySelectorAll("tr.diff-mismatch")].map(
      (row) => (row as HTMLElement).dataset.candidate,
    );
    expect(mismatches).toEqual(["ALPHA", "BRAVO"]);

    // Queue now shows the ballot as read; tallies did not use client math.
    expect(root.querySelector(".selection-queue h2")!.textContent).toContain(
      "1 pending of 2",
    );
    expect(root.querySelector(".stats-tallies")!.textContent).toContain(
      "1 ballots inspected",
    );

    // Scenario banner straight from the service payload.
    const banner = root.querySelector<HTMLElement>(".scenario-banner")!;
    expect(banner.dataset.scenario).toBe("too_high");

    // The reading landed exactly once in the fixture's log.
    expect(fixture.eventCount).toBe(1);
    expect(fixture.readings.get("B1:1")!.diffs).toHaveLength(2);
  });

  it("identical reading shows the clean confirmation", async () => {
    const fixture = standardFixture();
    const { root, consoleApp } = mountConsole(fixture, "official-token");
    await consoleApp.connect();
    await consoleApp.openQueueHead();
    fillInput(root, "BRAVO", "1");
    fillInput(root, "CHARLIE", "2");
    root.querySelector("form")!.dispatchEvent(new Event("submit"));
    await vi.waitFor(() => {
      expect(root.querySelector(".diff-clean")).not.toBeNull();
    });
    expect(root.querySelector(".diff-table")).toBeNull();
  });

  it("stats panel carries the log-head digest it was computed at", async () => {
    const fixture = standardFixture();
    const { root, consoleApp } = mountConsole(fixture, "official-token");
    await consoleApp.connect();
    expect(root.querySelector(".stats-head")!.textContent).toContain("head-0000");
    await consoleApp.openQueueHead();
    fillInput(root, "BRAVO", "1");
    root.querySelector("form")!.dispatchEvent(new Event("submit"));
    await vi.waitFor(() => {
      expect(root.querySelector(".stats-head")!.textContent).toContain("head-0001");
    });
  });

  it("opening an unselected ballot is refused client-side", async () => {
    const fixture = standardFixture();
    const { root, consoleApp } = mountConsole(fixture, "official-token");
    await consoleApp.connect();
    await consoleApp.openBallot({
      batch_id: "B1",
      ballot_index: 0,
      stage: 1,
      read: false,
    });
    expect(root.querySelector(".toast-error")!.textContent).toContain(
      "not among the sampler's selections",
    );
    expect(root.querySelector(".entry-section")).toBeNull();
  });

  it("second-pass prompt drives the escalation call", async () => {
    const fixture = standardFixture({ scenario: "inconclusive" });
    const { root, consoleApp } = mountConsole(fixture, "official-token");
    await consoleApp.connect();
    window.prompt = vi.fn().mockReturnValue("625");
    root.querySelector<HTMLButtonElement>(".second-pass-cta")!.click();
    await vi.waitFor(() => {
      expect(fixture.secondPassRequests).toEqual([625]);
    });
  });
});

describe("network failures", () => {
  it("offline connect shows the banner and nothing else mutates", async () => {
    const fixture = standardFixture();
    fixture.offline = true;
    const { root, consoleApp } = mountConsole(fixture, "official-token");
    await consoleApp.connect();
    expect(root.querySelector(".offline-banner")).not.toBeNull();
    expect(fixture.eventCount).toBe(0);
  });

  it("a retried submission reuses the idempotency key: one event total", async () => {
    const fixture = standardFixture();
    const { root, consoleApp } = mountConsole(fixture, "official-token");
    await consoleApp.connect();
    await consoleApp.openQueueHead();
    fillInput(root, "ALPHA", "1");

    fixture.offline = true;
    root.querySelector("form")!.dispatchEvent(new Event("submit"));
    await vi.waitFor(() => {
      expect(root.querySelector(".offline-banner")).not.toBeNull();
    });
    expect(fixture.readings.size).toBe(0); // nothing cached or queued

    fixture.offline = false;
    // Same logical reading, resubmitted after the connection returns.
    fillInput(root, "ALPHA", "1");
    root.querySelector("form")!.dispatchEvent(new Event("submit"));
    await vi.waitFor(() => {
      expect(fixture.readings.size).toBe(1);
    });
    expect(fixture.eventCount).toBe(1);
    expect(fixture.idempotency.size).toBe(1);
  });
});

describe("scrutineer role", () => {
  it("renders no mutating affordances", async () => {
    const fixture = standardFixture({ scenario: "inconclusive" });
    const { root, consoleApp } = mountConsole(fixture, "scrutineer-token");
    await consoleApp.connect();
    expect(root.querySelector(".role-chip")!.textContent).toContain("read-only");
    expect(root.querySelectorAll(".queue-item button")).toHaveLength(0);
    expect(root.querySelector(".second-pass-cta")).toBeNull();
  });

  it("client-side role guard refuses to submit readings", async () => {
    const fixture = standardFixture();
    const { consoleApp } = mountConsole(fixture, "scrutineer-token");
    await consoleApp.connect();
    // Force state past the UI guards; the submit method itself refuses.
    consoleApp.store.update({
      activeBallot: {
        batch_id: "B1",
        ballot_index: 1,
        origin: "booth-1",
        digitised: { BRAVO: 1 },
        candidates: ["ALPHA", "BRAVO", "CHARLIE"],
      },
    });
    await consoleApp.submitReading({ ALPHA: "1" });
    expect(fixture.readings.size).toBe(0);
    expect(fixture.eventCount).toBe(0);
  });

  it("the service refuses a forged mutation from the scrutineer token", async () => {
    const fixture = standardFixture();
    const response = await fixture.fetch(
      "http://fixture.local/v1/sessions/s-fixture/readings",
      {
        method: "POST",
        headers: { "X-Audit-Token": "scrutineer-token" },
        body: JSON.stringify({
          batch_id: "B1",
          ballot_index: 1,
          rankings: { ALPHA: 1 },
        }),
      },
    );
    expect(response.status).toBe(403);
    expect(fixture.readings.size).toBe(0);
  });
});
