// Session controller: orchestrates submit -> poll -> decide against the
// API client and reports view updates through callbacks. One active run
// per session (per browser tab).

import { ApiClient, type RunState, type WorkflowStep } from "./api.js";
import { pollUntil, type PollOptions } from "./poll.js";

export type SessionEvents = {
  onRunUpdate?: (run: RunState) => void;
  onStoreSizeChange?: (size: number) => void;
  onError?: (error: unknown) => void;
};

export class QuerySession {
  private activeRun: RunState | null = null;

  constructor(
    private readonly client: ApiClient,
    private readonly events: SessionEvents = {},
    private readonly pollOptions: PollOptions = {},
  ) {}

  get run(): RunState | null {
    return this.activeRun;
  }

  /** Submit a query, then poll until the run leaves the running state. */
  async submit(queryText: string, level?: string): Promise<RunState> {
    const { run_id } = await this.client.createRun(queryText, level);
    const run = await pollUntil(
      async () => {
        const state = await this.client.getRun(run_id);
        this.activeRun = state;
        this.events.onRunUpdate?.(state);
        return state;
      },
      (state) => state.status !== "running",
      this.pollOptions,
    );
    return run;
  }

  private async refreshStoreSize(): Promise<void> {
    const stats = await this.client.getStats();
    this.events.onStoreSizeChange?.(stats.store_size);
  }

  async accept(): Promise<RunState> {
    const run = this.requireAwaiting();
    const decided = await this.client.decide(run.run_id, "accept");
    this.activeRun = decided;
    this.events.onRunUpdate?.(decided);
    await this.refreshStoreSize();
    return decided;
  }

  async acceptEdited(steps: WorkflowStep[]): Promise<RunState> {
    const run = this.requireAwaiting();
    const decided = await this.client.decide(run.run_id, "accept_edited", steps);
    this.activeRun = decided;
    this.events.onRunUpdate?.(decided);
    await this.refreshStoreSize();
    return decided;
  }

  async reject(): Promise<RunState> {
    const run = this.requireAwaiting();
    const decided = await this.client.decide(run.run_id, "reject");
    this.activeRun = decided;
    this.events.onRunUpdate?.(decided);
    return decided;
  }

  private requireAwaiting(): RunState {
    if (!this.activeRun || this.activeRun.status !== "awaiting_decision") {
      throw new Error("no run awaiting a decision");
    }
    return this.activeRun;
  }
}

export class DistillSession {
  constructor(
    private readonly client: ApiClient,
    private readonly pollOptions: PollOptions = {},
  ) {}

  /** Trigger distillation and poll the report until it completes or fails. */
  async runDistill(incremental = false) {
    const { report_id } = await this.client.startDistill(incremental);
    const entry = await pollUntil(
      () => this.client.getReport(report_id),
      (value) => value.status !== "running",
      this.pollOptions,
    );
    if (entry.status === "failed") {
      throw new Error(entry.error ?? "distillation failed");
    }
    return entry.report!;
  }
}
