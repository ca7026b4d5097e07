"""HTTP service exposing runs, the example store, and distillation.

The web console is a pure client of this JSON API. Runs execute on worker
threads and are polled via GET /runs/{id}; distillation runs exclusive
with accept decisions so reports stay consistent. Runs in flight do not
survive a restart: the journal marks them failed on the next startup.
"""

from __future__ import annotations

import json
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from typing import Literal, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import agent as agent_mod
from .agent import AgentConfig, Decision, RunState, RunStatus
from .config import ServiceConfig, build_gateway
from .data_agent import import_schema, write_manifest
from .distiller import DistillConfig, DistillReport, distill
from .errors import InvalidState, QueryflowError, ValidationFailed
from .gateway import Gateway
from .model import (
    ComplexityLevel,
    Query,
    QueryOrigin,
    ScopeDescription,
    Workflow,
    WorkflowStep,
    now_rfc3339,
)
from .prompts import PromptSuite
from .store import ExampleStore


class RunCreateBody(BaseModel):
    query_text: str = Field(min_length=1)
    level: Optional[str] = None


class RunCreated(BaseModel):
    run_id: str


class StepBody(BaseModel):
    index: int
    task_description: str
    step_description: str


class DecisionBody(BaseModel):
    decision: Literal["accept", "reject", "accept_edited"]
    workflow: Optional[list[StepBody]] = None


class DistillBody(BaseModel):
    incremental: bool = False


class DistillStarted(BaseModel):
    report_id: str


class AppState:
    def __init__(
        self,
        config: ServiceConfig,
        gateway: Gateway | None = None,
        store: ExampleStore | None = None,
    ):
        self.config = config
        self.scope: ScopeDescription = config.scope()
        self.gateway = gateway or build_gateway(config)
        self.store = store or ExampleStore.load(
            config.store_path, embedding_dim=config.gateway.embedding_dim
        )
        self.suite = PromptSuite(config.prompt_dir)
        self.agent_config: AgentConfig = config.agent
        self.runs: dict[str, RunState] = {}
        self.stale_runs: dict[str, str] = {}  # run id -> original query text
        self.reports: dict[str, dict] = {}
        self.latest_report: DistillReport | None = None
        self.executor = ThreadPoolExecutor(max_workers=4, thread_name_prefix="qf-run")
        self.store_lock = threading.RLock()  # accepts and distill are exclusive
        self._load_journal()
        self._load_report_file()

    # -- runs journal: in-flight runs are lost on restart, reported failed --

    def _load_journal(self) -> None:
        path = self.config.runs_journal_path
        if not path.exists():
            return
        last: dict[str, dict] = {}
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    event = json.loads(line)
                    last[event["run_id"]] = event
        for run_id, event in last.items():
            if event["status"] in ("running", "awaiting_decision"):
                self.stale_runs[run_id] = event.get("query_text", "")

    def journal(self, state: RunState) -> None:
        path = self.config.runs_journal_path
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8") as handle:
            handle.write(
                json.dumps(
                    {
                        "run_id": state.run_id,
                        "status": state.status.value,
                        "query_text": state.query.text,
                        "at": now_rfc3339(),
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )

    def _load_report_file(self) -> None:
        path = self.config.report_path
        if path.exists():
            try:
                self.latest_report = DistillReport.from_json(
                    path.read_text(encoding="utf-8")
                )
            except (json.JSONDecodeError, KeyError, ValueError):
                self.latest_report = None

    # -- pipeline outputs --

    def write_distill_outputs(self, outcome) -> None:
        self.config.report_path.parent.mkdir(parents=True, exist_ok=True)
        self.config.report_path.write_text(outcome.report.to_json(), encoding="utf-8")
        write_spec_documents(outcome.report, self.config.api_spec_dir)
        if outcome.data_artifacts:
            write_manifest(outcome.data_artifacts, self.config.manifest_path)


def write_spec_documents(report: DistillReport, spec_dir) -> None:
    """Generated API documentation: one section per function."""
    spec_dir.mkdir(parents=True, exist_ok=True)
    for category, filename in (("Analysis", "analysis.md"), ("Output", "output.md")):
        functions = [f for f in report.functions if f.category.value == category]
        lines = [f"# {category} API functions", ""]
        for func in functions:
            lines.append(f"## {func.name}")
            lines.append("")
            lines.append(func.purpose)
            lines.append("")
            lines.append(f"Action group: `{func.action_group}`")
            lines.append("")
            if func.parameters:
                lines.append("Parameters:")
                lines.append("")
                for param in func.parameters:
                    lines.append(f"- `{param.name}` ({param.type}): {param.description}")
                lines.append("")
            lines.append("Supports steps:")
            lines.append("")
            for entry in func.provenance:
                marker = "reused" if entry.reused else "new"
                lines.append(f"- {entry.query_id}#{entry.step_index} ({marker})")
            lines.append("")
        (spec_dir / filename).write_text("\n".join(lines), encoding="utf-8")


def _record_summary(record) -> dict:
    return {
        "id": record.id,
        "query_id": record.query.id,
        "query_text": record.query.text,
        "level": record.query.level.value,
        "origin": record.query.origin.value,
        "step_count": len(record.workflow.steps),
        "created_at": record.created_at,
    }


def _record_detail(record) -> dict:
    data = _record_summary(record)
    data["thought"] = record.thought.text
    data["workflow"] = {
        "steps": [
            {
                "index": s.index,
                "task_description": s.task_description,
                "step_description": s.step_description,
            }
            for s in record.workflow.steps
        ]
    }
    return data


def create_app(
    config: ServiceConfig | None = None,
    gateway: Gateway | None = None,
    store: ExampleStore | None = None,
) -> FastAPI:
    state = AppState(config or ServiceConfig(), gateway=gateway, store=store)
    app = FastAPI(title="queryflow", version="0.1.0")
    app.state.qf = state

    @app.exception_handler(RequestValidationError)
    async def _invalid_payload(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def _execute_run(run_state: RunState, query: Query) -> None:
        agent_mod.run(
            query,
            state.store,
            state.gateway,
            state.agent_config,
            state.scope,
            suite=state.suite,
            state=run_state,
        )
        state.journal(run_state)

    @app.post("/runs", response_model=RunCreated)
    def create_run(body: RunCreateBody):
        if body.level is not None:
            try:
                level = ComplexityLevel.from_value(body.level)
            except ValueError:
                return JSONResponse(
                    status_code=400, content={"detail": f"unknown level {body.level!r}"}
                )
        else:
            level = ComplexityLevel.COMPLEX_SINGLE_GOAL
        query = Query(
            id=f"u-{uuid.uuid4().hex[:10]}",
            text=body.query_text,
            level=level,
            origin=QueryOrigin.USER_SUBMITTED,
        )
        run_state = RunState(query=query)
        state.runs[run_state.run_id] = run_state
        state.journal(run_state)
        state.executor.submit(_execute_run, run_state, query)
        return RunCreated(run_id=run_state.run_id)

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        run_state = state.runs.get(run_id)
        if run_state is not None:
            return run_state.to_dict()
        if run_id in state.stale_runs:
            return {
                "run_id": run_id,
                "query": {"text": state.stale_runs[run_id]},
                "iterations": [],
                "converged": False,
                "status": RunStatus.FAILED.value,
                "failure_reason": "service restarted while the run was in flight",
            }
        return JSONResponse(status_code=404, content={"detail": "unknown run id"})

    @app.post("/runs/{run_id}/decision")
    def decide_run(run_id: str, body: DecisionBody):
        run_state = state.runs.get(run_id)
        if run_state is None:
            if run_id in state.stale_runs:
                return JSONResponse(
                    status_code=409,
                    content={"detail": "run was lost in a service restart"},
                )
            return JSONResponse(status_code=404, content={"detail": "unknown run id"})
        edited = None
        if body.decision == "accept_edited":
            if not body.workflow:
                return JSONResponse(
                    status_code=400, content={"detail": "accept_edited needs a workflow"}
                )
            try:
                edited = Workflow(
                    tuple(
                        WorkflowStep(s.index, s.task_description, s.step_description)
                        for s in body.workflow
                    )
                )
            except ValueError as exc:
                return JSONResponse(status_code=400, content={"detail": str(exc)})
        try:
            with state.store_lock:
                agent_mod.decide(run_state, Decision(body.decision), state.store, edited)
        except InvalidState as exc:
            return JSONResponse(status_code=409, content={"detail": str(exc)})
        except ValidationFailed as exc:
            return JSONResponse(status_code=400, content={"detail": str(exc)})
        state.journal(run_state)
        return run_state.to_dict()

    @app.get("/examples")
    def list_examples(level: Optional[str] = None, q: Optional[str] = None):
        records = state.store.records()
        if level:
            try:
                wanted = ComplexityLevel.from_value(level)
            except ValueError:
                return JSONResponse(
                    status_code=400, content={"detail": f"unknown level {level!r}"}
                )
            records = tuple(r for r in records if r.query.level is wanted)
        if q:
            needle = q.lower()
            records = tuple(r for r in records if needle in r.query.text.lower())
        return {"examples": [_record_summary(r) for r in records]}

    @app.get("/examples/{record_id}")
    def get_example(record_id: int):
        record = state.store.get(record_id)
        if record is None:
            return JSONResponse(status_code=404, content={"detail": "unknown record id"})
        return _record_detail(record)

    def _execute_distill(report_id: str, incremental: bool) -> None:
        entry = state.reports[report_id]
        try:
            schema = (
                import_schema(state.config.schema_file)
                if state.config.schema_file
                else None
            )
            baseline = state.latest_report if incremental else None
            with state.store_lock:
                outcome = distill(
                    state.store,
                    state.gateway,
                    DistillConfig(schema=schema),
                    baseline=baseline,
                    suite=state.suite,
                )
            state.latest_report = outcome.report
            state.write_distill_outputs(outcome)
            entry["status"] = "complete"
            entry["report"] = outcome.report.to_dict()
            entry["data_artifacts"] = len(outcome.data_artifacts)
            entry["data_failures"] = len(outcome.data_failures)
        except QueryflowError as exc:
            entry["status"] = "failed"
            entry["error"] = str(exc)

    @app.post("/distill", response_model=DistillStarted)
    def start_distill(body: DistillBody | None = None):
        body = body or DistillBody()
        report_id = f"report-{uuid.uuid4().hex[:10]}"
        state.reports[report_id] = {"status": "running", "report": None}
        state.executor.submit(_execute_distill, report_id, body.incremental)
        return DistillStarted(report_id=report_id)

    @app.get("/reports/{report_id}")
    def get_report(report_id: str):
        entry = state.reports.get(report_id)
        if entry is None:
            return JSONResponse(status_code=404, content={"detail": "unknown report id"})
        return entry

    @app.get("/stats")
    def stats():
        payload: dict = {"store_size": len(state.store)}
        if state.latest_report is not None:
            payload["slices"] = [s.to_dict() for s in state.latest_report.slices]
            payload["function_total"] = len(state.latest_report.functions)
        else:
            payload["slices"] = []
            payload["function_total"] = 0
        return payload

    console_dir = state.config.console_dir
    if console_dir is not None and console_dir.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/console", StaticFiles(directory=console_dir, html=True), name="console")

    return app


def serve(config: ServiceConfig) -> None:
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.listen_host, port=config.listen_port)
