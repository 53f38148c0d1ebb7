import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, OfflineError } from "../src/api";
import { standardFixture } from "./fixture";

describe("ApiClient", () => {
  it("unwraps envelopes and reports the head", async () => {
    const fixture = standardFixture();
    const client = new ApiClient({
      baseUrl: "http://fixture.local",
      token: "official-token",
      fetchImpl: fixture.fetch,
    });
    const response = await client.getSelections("s-fixture");
    expect(response.head).toBe("head-0000");
    expect(response.data.selections).toHaveLength(2);
  });

  it("throws ApiError with code and invariant from the error envelope", async () => {
    const fixture = standardFixture();
    const client = new ApiClient({
      baseUrl: "http://fixture.local",
      token: "official-token",
      fetchImpl: fixture.fetch,
    });
    const attempt = client.submitReading(
      "s-fixture",
      { batch_id: "B1", ballot_index: 0, rankings: {}, operator: "op" },
      "key-1",
    );
    await expect(attempt).rejects.toMatchObject({
      code: "unselected_ballot",
      invariant: "unselected_ballot",
      status: 422,
    });
  });

  it("wraps network failure as OfflineError", async () => {
    const fixture = standardFixture();
    fixture.offline = true;
    const client = new ApiClient({
      baseUrl: "http://fixture.local",
      token: "official-token",
      fetchImpl: fixture.fetch,
    });
    await expect(client.getStats("s-fixture")).rejects.toBeInstanceOf(OfflineError);
  });

  it("scrutineer token gets 403 on mutation", async () => {
    const fixture = standardFixture();
    const client = new ApiClient({
      baseUrl: "http://fixture.local",
      token: "scrutineer-token",
      fetchImpl: fixture.fetch,
    });
    const attempt = client.submitReading(
      "s-fixture",
      { batch_id: "B1", ballot_index: 1, rankings: { ALPHA: 1 }, operator: "op" },
      "key-2",
    );
    await expect(attempt).rejects.toMatchObject({ code: "forbidden_role" });
    expect(fixture.readings.size).toBe(0);
  });

  it("same idempotency key returns the recorded response without a new event", async () => {
    const fixture = standardFixture();
    const client = new ApiClient({
      baseUrl: "http://fixture.local",
      token: "official-token",
      fetchImpl: fixture.fetch,
    });
    const reading = {
      batch_id: "B1",
      ballot_index: 1,
      rankings: { BRAVO: 1, CHARLIE: 2 },
      operator: "op",
    };
    const first = await client.submitReading("s-fixture", reading, "retry-key");
    const second = await client.submitReading("s-fixture", reading, "retry-key");
    expect(second).toEqual(first);
    expect(fixture.eventCount).toBe(1);
  });

  it("throws ApiError (not Offline) on unknown token", async () => {
    const fixture = standardFixture();
    const client = new ApiClient({
      baseUrl: "http://fixture.local",
      token: "bogus",
      fetchImpl: fixture.fetch,
    });
    await expect(client.getStats("s-fixture")).rejects.toMatchObject({
      code: "unauthorized",
      status: 401,
    });
  });
});
