// Typed client for the queryflow HTTP API. The view model mirrors the
// service JSON exactly; nothing is derived client-side.

export type WorkflowStep = {
  index: number;
  task_description: string;
  step_description: string;
};

export type Workflow = { steps: WorkflowStep[] };

export type RunIteration = {
  retrieved_ids: number[];
  thought: string;
  workflow: Workflow;
};

export type RunState = {
  run_id: string;
  query: { id?: string; text: string; level?: string; origin?: string };
  iterations: RunIteration[];
  converged: boolean;
  status: "running" | "awaiting_decision" | "accepted" | "rejected" | "failed";
  failure_reason: string | null;
  created_at?: string;
};

export type ExampleSummary = {
  id: number;
  query_id: string;
  query_text: string;
  level: string;
  origin: string;
  step_count: number;
  created_at: string;
};

export type ExampleDetail = ExampleSummary & {
  thought: string;
  workflow: Workflow;
};

export type ProvenanceEntry = {
  query_id: string;
  step_index: number;
  reused: boolean;
};

export type ApiFunction = {
  name: string;
  purpose: string;
  parameters: { name: string; type: string; description: string }[];
  category: string;
  action_group: string;
  provenance: ProvenanceEntry[];
};

export type GroupStats = { label: string; steps: number; new_functions: number };

export type SliceReport = {
  label: string;
  query_ids: string[];
  steps_total: number;
  category_counts: Record<string, number>;
  new_function_counts: Record<string, number>;
  reuse_ratios: Record<string, number>;
  groups: Record<string, GroupStats[]>;
};

export type DistillReport = {
  slices: SliceReport[];
  functions: ApiFunction[];
  failures: unknown[];
};

export type ReportEntry = {
  status: "running" | "complete" | "failed";
  report: DistillReport | null;
  error?: string;
};

export type Stats = {
  store_size: number;
  slices: SliceReport[];
  function_total: number;
};

export type Decision = "accept" | "reject" | "accept_edited";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseError(response: Response): Promise<never> {
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && body.detail) detail = JSON.stringify(body.detail);
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!response.ok) await parseError(response);
    return response.json() as Promise<T>;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) await parseError(response);
    return response.json() as Promise<T>;
  }

  createRun(queryText: string, level?: string): Promise<{ run_id: string }> {
    const body: Record<string, string> = { query_text: queryText };
    if (level) body.level = level;
    return this.post("/runs", body);
  }

  getRun(runId: string): Promise<RunState> {
    return this.get(`/runs/${encodeURIComponent(runId)}`);
  }

  decide(runId: string, decision: Decision, workflow?: WorkflowStep[]): Promise<RunState> {
    const body: Record<string, unknown> = { decision };
    if (workflow) body.workflow = workflow;
    return this.post(`/runs/${encodeURIComponent(runId)}/decision`, body);
  }

  listExamples(filter: { level?: string; q?: string } = {}): Promise<{ examples: ExampleSummary[] }> {
    const params = new URLSearchParams();
    if (filter.level) params.set("level", filter.level);
    if (filter.q) params.set("q", filter.q);
    const suffix = params.toString() ? `?${params.toString()}` : "";
    return this.get(`/examples${suffix}`);
  }

  getExample(recordId: number): Promise<ExampleDetail> {
    return this.get(`/examples/${recordId}`);
  }

  startDistill(incremental = false): Promise<{ report_id: string }> {
    return this.post("/distill", { incremental });
  }

  getReport(reportId: string): Promise<ReportEntry> {
    return this.get(`/reports/${encodeURIComponent(reportId)}`);
  }

  getStats(): Promise<Stats> {
    return this.get("/stats");
  }
}
