// Report view: bar-chart totals equal the report JSON and provenance
// links carry the exact record/step targets.

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import {
  renderFunctionPage,
  renderGroupBars,
  renderReport,
  renderSliceSummary,
} from "../src/render.js";
import { DistillSession } from "../src/session.js";
import { SAMPLE_REPORT, StubService } from "./stub_service.js";

const instantPoll = { intervalMs: 1, sleep: async () => {} };

describe("report rendering", () => {
  it("bar totals equal the report JSON totals", () => {
    const slice = SAMPLE_REPORT.slices[0];
    for (const category of Object.keys(slice.groups)) {
      const html = renderGroupBars(slice, category);
      const totalMatch = html.match(/data-total="(\d+)"/);
      expect(totalMatch).not.toBeNull();
      const barValues = [...html.matchAll(/data-new-functions="(\d+)"/g)].map((m) =>
        Number(m[1]),
      );
      const jsonTotal = slice.groups[category].reduce(
        (sum, group) => sum + group.new_functions,
        0,
      );
      expect(Number(totalMatch![1])).toBe(jsonTotal);
      expect(barValues.reduce((a, b) => a + b, 0)).toBe(jsonTotal);
      expect(jsonTotal).toBe(slice.new_function_counts[category]);
    }
  });

  it("slice summary shows counts and ratios from the JSON", () => {
    const html = renderSliceSummary(SAMPLE_REPORT.slices[0]);
    expect(html).toContain("14 steps");
    expect(html).toContain("<dt>Analysis</dt><dd>6</dd>");
    expect(html).toContain("66.67%");
  });

  it("provenance links target the exact record and step", () => {
    const html = renderFunctionPage(SAMPLE_REPORT.functions[0]);
    expect(html).toContain('data-query-id="c1q000"');
    expect(html).toContain('data-step-index="2"');
    expect(html).toContain('href="#record/c1q000/2"');
    expect(html).toContain('<span class="reused">reused</span>');
    expect(html).toContain('<span class="new">new</span>');
  });

  it("the full report view embeds every function page", () => {
    const html = renderReport(SAMPLE_REPORT);
    expect(html).toContain('data-function-count="2"');
    expect(html).toContain('data-function="analyze_yield_trend"');
    expect(html).toContain('data-function="summarize_findings"');
  });
});

describe("distill session", () => {
  it("polls the report endpoint until completion", async () => {
    const stub = new StubService({ report: SAMPLE_REPORT });
    const session = new DistillSession(new ApiClient("", stub.fetch), instantPoll);
    const report = await session.runDistill();
    expect(report.functions.length).toBe(2);
    expect(stub.requestLog[0]).toBe("POST /distill");
    expect(stub.requestLog.filter((line) => line.startsWith("GET /reports/")).length)
      .toBeGreaterThan(0);
  });

  it("a failed distillation surfaces its error", async () => {
    const stub = new StubService(); // no report configured -> failure
    const session = new DistillSession(new ApiClient("", stub.fetch), instantPoll);
    await expect(session.runDistill()).rejects.toThrow(/empty/);
  });
});
