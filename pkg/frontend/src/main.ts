// Browser bootstrap: wires the DOM to the session controller and the pure
// renderers. All domain data comes from the service; this file only moves
// markup into containers and events back to the API.

import { ApiClient, type ExampleDetail, type WorkflowStep } from "./api.js";
import { deleteStep, fromWorkflow, insertStep, moveStep, updateStep } from "./edit.js";
import {
  renderDecisionPanel,
  renderEditor,
  renderExampleBrowser,
  renderExampleDetail,
  renderReport,
  renderRunStatus,
  renderTimeline,
} from "./render.js";
import { DistillSession, QuerySession } from "./session.js";

const client = new ApiClient("");
let editedSteps: WorkflowStep[] | null = null;

function element<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing #${id}`);
  return found as T;
}

const timelineBox = () => element<HTMLDivElement>("timeline");
const statusBox = () => element<HTMLDivElement>("run-status");
const decisionBox = () => element<HTMLDivElement>("decision");
const browserBox = () => element<HTMLDivElement>("browser");
const detailBox = () => element<HTMLDivElement>("example-detail");
const reportBox = () => element<HTMLDivElement>("report");

const session = new QuerySession(client, {
  onRunUpdate: (run) => {
    statusBox().innerHTML = renderRunStatus(run);
    timelineBox().innerHTML = renderTimeline(run);
    decisionBox().innerHTML = editedSteps ? "" : renderDecisionPanel(run);
  },
  onStoreSizeChange: () => {
    void refreshBrowser();
  },
  onError: (error) => {
    statusBox().innerHTML = `<p class="status failed">${String(error)}</p>`;
  },
});

const distillSession = new DistillSession(client);

async function refreshBrowser(): Promise<void> {
  const levelFilter = element<HTMLSelectElement>("filter-level").value;
  const search = element<HTMLInputElement>("filter-q").value;
  const [listing, stats] = await Promise.all([
    client.listExamples({ level: levelFilter || undefined, q: search || undefined }),
    client.getStats(),
  ]);
  browserBox().innerHTML = renderExampleBrowser(listing.examples, stats.store_size);
}

async function openExample(recordId: number, highlightStep?: number): Promise<void> {
  const detail: ExampleDetail = await client.getExample(recordId);
  detailBox().innerHTML = renderExampleDetail(detail, highlightStep);
  detailBox().scrollIntoView({ behavior: "smooth" });
}

async function openProvenance(queryId: string, stepIndex: number): Promise<void> {
  const listing = await client.listExamples({});
  const match = listing.examples.find((example) => example.query_id === queryId);
  if (match) await openExample(match.id, stepIndex);
}

function currentWorkflowSteps(): WorkflowStep[] {
  const run = session.run;
  if (!run || run.iterations.length === 0) return [];
  return run.iterations[run.iterations.length - 1].workflow.steps;
}

function showEditor(): void {
  editedSteps = fromWorkflow(currentWorkflowSteps());
  decisionBox().innerHTML = renderEditor(editedSteps);
}

function collectEditorTexts(): void {
  if (!editedSteps) return;
  const rows = decisionBox().querySelectorAll<HTMLLIElement>(".edit-step");
  rows.forEach((row, position) => {
    const task = row.querySelector<HTMLInputElement>(".edit-task")?.value ?? "";
    const detail = row.querySelector<HTMLTextAreaElement>(".edit-detail")?.value ?? "";
    editedSteps = updateStep(editedSteps!, position, {
      task_description: task,
      step_description: detail,
    });
  });
}

async function handleDecisionClick(target: HTMLElement): Promise<void> {
  const action = target.dataset.action;
  if (!action) return;
  const position = Number(target.dataset.position ?? "-1");
  switch (action) {
    case "accept":
      await session.accept();
      return;
    case "reject":
      await session.reject();
      return;
    case "edit":
      showEditor();
      return;
    case "move-up":
      collectEditorTexts();
      editedSteps = moveStep(editedSteps!, position, position - 1);
      decisionBox().innerHTML = renderEditor(editedSteps);
      return;
    case "move-down":
      collectEditorTexts();
      editedSteps = moveStep(editedSteps!, position, position + 1);
      decisionBox().innerHTML = renderEditor(editedSteps);
      return;
    case "delete":
      collectEditorTexts();
      editedSteps = deleteStep(editedSteps!, position);
      decisionBox().innerHTML = renderEditor(editedSteps);
      return;
    case "insert-after":
      collectEditorTexts();
      editedSteps = insertStep(editedSteps!, position + 1);
      decisionBox().innerHTML = renderEditor(editedSteps);
      return;
    case "submit-edited": {
      collectEditorTexts();
      const steps = editedSteps!;
      editedSteps = null;
      await session.acceptEdited(steps);
      return;
    }
    case "cancel-edit":
      editedSteps = null;
      if (session.run) decisionBox().innerHTML = renderDecisionPanel(session.run);
      return;
  }
}

export function boot(): void {
  element<HTMLFormElement>("submit-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const text = element<HTMLInputElement>("query-text").value.trim();
    const level = element<HTMLSelectElement>("query-level").value || undefined;
    if (!text) return;
    editedSteps = null;
    void session.submit(text, level).catch((error) => {
      statusBox().innerHTML = `<p class="status failed">${String(error)}</p>`;
    });
  });

  decisionBox().addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    void handleDecisionClick(target).catch((error) => {
      statusBox().innerHTML = `<p class="status failed">${String(error)}</p>`;
    });
  });

  browserBox().addEventListener("click", (event) => {
    const row = (event.target as HTMLElement).closest<HTMLTableRowElement>(".example-row");
    if (row) void openExample(Number(row.dataset.recordId));
  });

  element<HTMLButtonElement>("refresh-browser").addEventListener("click", () => {
    void refreshBrowser();
  });

  element<HTMLButtonElement>("run-distill").addEventListener("click", () => {
    reportBox().innerHTML = '<p class="status running">Distilling…</p>';
    void distillSession
      .runDistill(element<HTMLInputElement>("distill-incremental").checked)
      .then((report) => {
        reportBox().innerHTML = renderReport(report);
      })
      .catch((error) => {
        reportBox().innerHTML = `<p class="status failed">${String(error)}</p>`;
      });
  });

  reportBox().addEventListener("click", (event) => {
    const link = (event.target as HTMLElement).closest<HTMLAnchorElement>(".provenance-link");
    if (link) {
      event.preventDefault();
      void openProvenance(link.dataset.queryId!, Number(link.dataset.stepIndex));
    }
  });

  void refreshBrowser();
}

if (typeof document !== "undefined" && document.getElementById("submit-form")) {
  boot();
}
