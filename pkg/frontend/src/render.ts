// Pure HTML renderers. Every function maps service JSON to a markup
// string; DOM wiring lives in main.ts. Pure functions keep the views
// testable without a browser.

import type {
  ApiFunction,
  DistillReport,
  ExampleDetail,
  ExampleSummary,
  RunState,
  SliceReport,
  WorkflowStep,
} from "./api.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderWorkflowSteps(steps: WorkflowStep[]): string {
  const items = steps
    .map(
      (step) => `
    <li class="step" data-step-index="${step.index}">
      <span class="step-task">${escapeHtml(step.task_description)}</span>
      <p class="step-detail">${escapeHtml(step.step_description)}</p>
    </li>`,
    )
    .join("");
  return `<ol class="workflow">${items}</ol>`;
}

export function renderTimeline(run: RunState): string {
  const entries = run.iterations
    .map((iteration, position) => {
      const retrieved = iteration.retrieved_ids.length
        ? iteration.retrieved_ids
            .map((id) => `<a href="#example-${id}" class="icl-link">#${id}</a>`)
            .join(", ")
        : "none (zero-shot)";
      const thought = iteration.thought
        ? `<blockquote class="thought">${escapeHtml(iteration.thought)}</blockquote>`
        : "";
      return `
    <section class="iteration" data-iteration="${position}">
      <h4>Iteration ${position + 1}</h4>
      <p class="retrieved">Retrieved examples: ${retrieved}</p>
      ${thought}
      ${renderWorkflowSteps(iteration.workflow.steps)}
    </section>`;
    })
    .join("");
  const convergence = run.converged
    ? `<p class="converged">Deliberation converged after ${run.iterations.length} iterations.</p>`
    : "";
  return `<div class="timeline">${entries}${convergence}</div>`;
}

export function renderRunStatus(run: RunState): string {
  if (run.status === "failed") {
    return `<p class="status failed">Run failed: ${escapeHtml(run.failure_reason ?? "unknown")}</p>`;
  }
  return `<p class="status ${run.status}">${run.status.replace("_", " ")}</p>`;
}

export function renderDecisionPanel(run: RunState): string {
  if (run.status !== "awaiting_decision") return "";
  return `
  <div class="decision-panel" data-run-id="${escapeHtml(run.run_id)}">
    <button data-action="accept">Accept</button>
    <button data-action="edit">Edit</button>
    <button data-action="reject">Reject</button>
  </div>`;
}

export function renderEditor(steps: WorkflowStep[]): string {
  const rows = steps
    .map(
      (step, position) => `
    <li class="edit-step" data-position="${position}" data-step-index="${step.index}">
      <input class="edit-task" value="${escapeHtml(step.task_description)}">
      <textarea class="edit-detail">${escapeHtml(step.step_description)}</textarea>
      <button data-action="move-up" data-position="${position}">up</button>
      <button data-action="move-down" data-position="${position}">down</button>
      <button data-action="delete" data-position="${position}">delete</button>
      <button data-action="insert-after" data-position="${position}">insert after</button>
    </li>`,
    )
    .join("");
  return `
  <div class="editor">
    <ol class="edit-steps">${rows}</ol>
    <button data-action="submit-edited">Accept edited workflow</button>
    <button data-action="cancel-edit">Cancel</button>
  </div>`;
}

export function renderExampleBrowser(examples: ExampleSummary[], storeSize: number): string {
  const rows = examples
    .map(
      (example) => `
    <tr class="example-row" id="example-${example.id}" data-record-id="${example.id}">
      <td>${example.id}</td>
      <td>${escapeHtml(example.query_text)}</td>
      <td>${escapeHtml(example.level)}</td>
      <td>${example.step_count}</td>
    </tr>`,
    )
    .join("");
  return `
  <div class="browser">
    <p class="store-size">Examples in store: <span class="count">${storeSize}</span></p>
    <table class="examples">
      <thead><tr><th>id</th><th>query</th><th>level</th><th>steps</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>
  </div>`;
}

export function renderExampleDetail(example: ExampleDetail, highlightStep?: number): string {
  const steps = example.workflow.steps
    .map((step) => {
      const highlighted = step.index === highlightStep ? " highlighted" : "";
      return `
    <li class="step${highlighted}" data-step-index="${step.index}">
      <span class="step-task">${escapeHtml(step.task_description)}</span>
      <p class="step-detail">${escapeHtml(step.step_description)}</p>
    </li>`;
    })
    .join("");
  const thought = example.thought
    ? `<blockquote class="thought">${escapeHtml(example.thought)}</blockquote>`
    : "";
  return `
  <article class="example-detail" data-record-id="${example.id}">
    <h3>#${example.id} ${escapeHtml(example.query_text)}</h3>
    <p class="meta">${escapeHtml(example.level)} / ${escapeHtml(example.origin)}</p>
    ${thought}
    <ol class="workflow">${steps}</ol>
  </article>`;
}

// Bar charts are plain markup: one .bar per group with height data attrs,
// so totals are checkable directly against the report JSON.

export function renderGroupBars(slice: SliceReport, category: string): string {
  const groups = slice.groups[category] ?? [];
  const bars = groups
    .map(
      (group) => `
    <div class="bar" data-label="${escapeHtml(group.label)}"
         data-steps="${group.steps}" data-new-functions="${group.new_functions}">
      <span class="bar-label">${escapeHtml(group.label)}</span>
      <span class="bar-value">${group.new_functions}</span>
    </div>`,
    )
    .join("");
  const total = groups.reduce((sum, group) => sum + group.new_functions, 0);
  return `
  <figure class="group-chart" data-category="${escapeHtml(category)}"
          data-slice="${escapeHtml(slice.label)}" data-total="${total}">
    <figcaption>${escapeHtml(category)} functions by action group (${escapeHtml(slice.label)})</figcaption>
    ${bars}
  </figure>`;
}

export function renderSliceSummary(slice: SliceReport): string {
  const counts = Object.entries(slice.category_counts)
    .map(([category, count]) => `<dt>${escapeHtml(category)}</dt><dd>${count}</dd>`)
    .join("");
  const ratios = Object.entries(slice.reuse_ratios)
    .map(
      ([category, ratio]) =>
        `<dt>${escapeHtml(category)} new-function ratio</dt><dd>${(ratio * 100).toFixed(2)}%</dd>`,
    )
    .join("");
  return `
  <section class="slice" data-slice="${escapeHtml(slice.label)}">
    <h4>Slice ${escapeHtml(slice.label)}: ${slice.steps_total} steps</h4>
    <dl class="category-counts">${counts}</dl>
    <dl class="reuse-ratios">${ratios}</dl>
  </section>`;
}

export function renderFunctionPage(fn: ApiFunction): string {
  const parameters = fn.parameters
    .map(
      (parameter) =>
        `<li><code>${escapeHtml(parameter.name)}</code> (${escapeHtml(parameter.type)}): ${escapeHtml(parameter.description)}</li>`,
    )
    .join("");
  const provenance = fn.provenance
    .map(
      (entry) => `
    <li>
      <a class="provenance-link" href="#record/${encodeURIComponent(entry.query_id)}/${entry.step_index}"
         data-query-id="${escapeHtml(entry.query_id)}" data-step-index="${entry.step_index}">
        ${escapeHtml(entry.query_id)} step ${entry.step_index}
      </a>
      ${entry.reused ? '<span class="reused">reused</span>' : '<span class="new">new</span>'}
    </li>`,
    )
    .join("");
  return `
  <article class="function-page" data-function="${escapeHtml(fn.name)}">
    <h3>${escapeHtml(fn.name)}</h3>
    <p>${escapeHtml(fn.purpose)}</p>
    <p class="meta">${escapeHtml(fn.category)} / group ${escapeHtml(fn.action_group)}</p>
    <ul class="parameters">${parameters}</ul>
    <h4>Supports steps</h4>
    <ul class="provenance">${provenance}</ul>
  </article>`;
}

export function renderReport(report: DistillReport): string {
  const slices = report.slices.map(renderSliceSummary).join("");
  const charts = report.slices
    .flatMap((slice) =>
      Object.keys(slice.groups).map((category) => renderGroupBars(slice, category)),
    )
    .join("");
  const functions = report.functions.map(renderFunctionPage).join("");
  return `
  <div class="report">
    ${slices}
    ${charts}
    <div class="functions" data-function-count="${report.functions.length}">${functions}</div>
  </div>`;
}
