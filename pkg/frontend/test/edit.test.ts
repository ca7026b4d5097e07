// Edit mode keeps step indices contiguous through every operation and the
// stub service rejects non-contiguous submissions.

import { describe, expect, it } from "vitest";

import { ApiClient, type WorkflowStep } from "../src/api.js";
import {
  deleteStep,
  fromWorkflow,
  insertStep,
  isContiguous,
  moveStep,
  updateStep,
} from "../src/edit.js";
import { QuerySession } from "../src/session.js";
import { StubService } from "./stub_service.js";

const THREE_STEPS: WorkflowStep[] = [
  { index: 1, task_description: "A", step_description: "do a" },
  { index: 2, task_description: "B", step_description: "do b" },
  { index: 3, task_description: "C", step_description: "do c" },
];

describe("edit model", () => {
  it("reordering renumbers contiguously", () => {
    const moved = moveStep(fromWorkflow(THREE_STEPS), 2, 0);
    expect(moved.map((step) => step.task_description)).toEqual(["C", "A", "B"]);
    expect(moved.map((step) => step.index)).toEqual([1, 2, 3]);
    expect(isContiguous(moved)).toBe(true);
  });

  it("delete and insert renumber contiguously", () => {
    let steps = deleteStep(fromWorkflow(THREE_STEPS), 1);
    expect(steps.map((step) => step.task_description)).toEqual(["A", "C"]);
    expect(steps.map((step) => step.index)).toEqual([1, 2]);
    steps = insertStep(steps, 1, "B2", "do b again");
    expect(steps.map((step) => step.task_description)).toEqual(["A", "B2", "C"]);
    expect(steps.map((step) => step.index)).toEqual([1, 2, 3]);
  });

  it("the last step cannot be deleted", () => {
    const single = fromWorkflow([THREE_STEPS[0]]);
    expect(deleteStep(single, 0)).toEqual(single);
  });

  it("text edits do not disturb numbering", () => {
    const steps = updateStep(fromWorkflow(THREE_STEPS), 1, {
      task_description: "B improved",
    });
    expect(steps[1].task_description).toBe("B improved");
    expect(isContiguous(steps)).toBe(true);
  });

  it("out-of-range moves are no-ops", () => {
    const steps = fromWorkflow(THREE_STEPS);
    expect(moveStep(steps, 0, -1)).toEqual(steps);
    expect(moveStep(steps, 5, 0)).toEqual(steps);
  });
});

describe("edited submission", () => {
  it("accept_edited submits the renumbered workflow whole", async () => {
    const stub = new StubService();
    const client = new ApiClient("", stub.fetch);
    const session = new QuerySession(client, {}, { intervalMs: 1, sleep: async () => {} });
    const run = await session.submit("edit me");

    let steps = fromWorkflow(run.iterations.at(-1)!.workflow.steps);
    steps = moveStep(steps, 2, 0);
    steps = deleteStep(steps, 2);
    expect(isContiguous(steps)).toBe(true);

    await session.acceptEdited(steps);
    const stored = await client.getExample(1);
    expect(stored.workflow.steps.map((step) => step.index)).toEqual([1, 2]);
    expect(stored.step_count).toBe(2);
  });

  it("a non-contiguous workflow is rejected by the service contract", async () => {
    const stub = new StubService();
    const client = new ApiClient("", stub.fetch);
    const session = new QuerySession(client, {}, { intervalMs: 1, sleep: async () => {} });
    const run = await session.submit("bad edit");
    const broken = run.iterations.at(-1)!.workflow.steps.map((step, position) => ({
      ...step,
      index: position === 0 ? 1 : position + 2,
    }));
    await expect(client.decide(run.run_id, "accept_edited", broken)).rejects.toMatchObject({
      status: 400,
    });
  });
});
