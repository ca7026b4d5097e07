// API client and polling behavior.

import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { pollUntil } from "../src/poll.js";
import { StubService } from "./stub_service.js";

describe("api client", () => {
  it("encodes filters into the examples query string", async () => {
    const stub = new StubService();
    const client = new ApiClient("", stub.fetch);
    await client.listExamples({ level: "multi_goal", q: "yield trend" });
    expect(stub.requestLog.at(-1)).toBe("GET /examples?level=multi_goal&q=yield+trend");
  });

  it("maps error statuses to ApiError with the detail body", async () => {
    const stub = new StubService();
    const client = new ApiClient("", stub.fetch);
    try {
      await client.getRun("run-nope");
      expect.unreachable();
    } catch (error) {
      expect(error).toBeInstanceOf(ApiError);
      expect((error as ApiError).status).toBe(404);
      expect((error as ApiError).detail).toContain("unknown run id");
    }
  });
});

describe("pollUntil", () => {
  it("stops as soon as the predicate holds", async () => {
    let calls = 0;
    const result = await pollUntil(
      async () => ++calls,
      (value) => value >= 3,
      { intervalMs: 1, sleep: async () => {} },
    );
    expect(result).toBe(3);
    expect(calls).toBe(3);
  });

  it("backs off exponentially on failures and recovers", async () => {
    const naps: number[] = [];
    let calls = 0;
    const result = await pollUntil(
      async () => {
        calls += 1;
        if (calls <= 3) throw new Error("503 from the service");
        return "done";
      },
      (value) => value === "done",
      { intervalMs: 1000, sleep: async (ms) => void naps.push(ms) },
    );
    expect(result).toBe("done");
    expect(naps).toEqual([2000, 4000, 8000]);
  });

  it("gives up after maxAttempts and rethrows the last error", async () => {
    await expect(
      pollUntil(
        async () => {
          throw new Error("always down");
        },
        () => true,
        { intervalMs: 1, maxAttempts: 3, sleep: async () => {} },
      ),
    ).rejects.toThrow("always down");
  });
});
