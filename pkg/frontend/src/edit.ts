// Workflow edit model: step-level reorder, edit, delete, insert. Every
// operation renumbers indices contiguously from 1, so the edited workflow
// always satisfies the server's contiguity invariant before submit.

import type { WorkflowStep } from "./api.js";

function renumber(steps: WorkflowStep[]): WorkflowStep[] {
  return steps.map((step, position) => ({ ...step, index: position + 1 }));
}

export function fromWorkflow(steps: WorkflowStep[]): WorkflowStep[] {
  return renumber(steps.map((step) => ({ ...step })));
}

export function moveStep(steps: WorkflowStep[], from: number, to: number): WorkflowStep[] {
  if (from < 0 || from >= steps.length || to < 0 || to >= steps.length) return steps;
  const next = steps.map((step) => ({ ...step }));
  const [moved] = next.splice(from, 1);
  next.splice(to, 0, moved);
  return renumber(next);
}

export function deleteStep(steps: WorkflowStep[], at: number): WorkflowStep[] {
  if (at < 0 || at >= steps.length || steps.length <= 1) return steps;
  const next = steps.filter((_, position) => position !== at);
  return renumber(next);
}

export function insertStep(
  steps: WorkflowStep[],
  at: number,
  task = "New step",
  detail = "Describe the step.",
): WorkflowStep[] {
  const next = steps.map((step) => ({ ...step }));
  const position = Math.max(0, Math.min(at, next.length));
  next.splice(position, 0, { index: 0, task_description: task, step_description: detail });
  return renumber(next);
}

export function updateStep(
  steps: WorkflowStep[],
  at: number,
  fields: Partial<Pick<WorkflowStep, "task_description" | "step_description">>,
): WorkflowStep[] {
  return steps.map((step, position) =>
    position === at ? { ...step, ...fields } : { ...step },
  );
}

export function isContiguous(steps: WorkflowStep[]): boolean {
  return steps.every((step, position) => step.index === position + 1);
}
