from __future__ import annotations

import itertools

import pytest

from queryflow.gateway import Gateway, ScriptedBackend
from queryflow.model import (
    ComplexityLevel,
    Query,
    QueryOrigin,
    QueryWorkflowRecord,
    ScopeDescription,
    Thought,
    Workflow,
    WorkflowStep,
)

SCOPE = ScopeDescription(
    title="Wafer Yield Analytics",
    text=(
        "The assistant supports engineers analyzing semiconductor wafer test"
        " data. Data covers lots, wafers, and dies with test results, yields,"
        " E-test measurements, and process change events. Typical work"
        " includes yield trending, threshold filtering, wafer map pattern"
        " analysis, correlation studies, and report generation."
    ),
)

_id_counter = itertools.count(1)


def make_query(
    text: str,
    level: ComplexityLevel = ComplexityLevel.SIMPLE,
    origin: QueryOrigin = QueryOrigin.GENERATED,
    query_id: str | None = None,
) -> Query:
    if query_id is None:
        query_id = f"q{next(_id_counter):04d}"
    return Query(id=query_id, text=text, level=level, origin=origin)


def make_workflow(*tasks: str) -> Workflow:
    steps = tuple(
        WorkflowStep(i, task, f"Carry out {task.lower()} on the selected data.")
        for i, task in enumerate(tasks, start=1)
    )
    return Workflow(steps)


def make_record(
    query_text: str,
    thought_text: str = "",
    tasks: tuple[str, ...] = ("Retrieve Data", "Summarize Results"),
    level: ComplexityLevel = ComplexityLevel.SIMPLE,
    query_id: str | None = None,
) -> QueryWorkflowRecord:
    thought = Thought(thought_text or f"The query asks to {query_text.lower()}")
    return QueryWorkflowRecord(
        query=make_query(query_text, level=level, query_id=query_id),
        thought=thought,
        workflow=make_workflow(*tasks),
        created_at="2026-01-05T10:00:00+00:00",
    )


@pytest.fixture
def scope() -> ScopeDescription:
    return SCOPE


@pytest.fixture
def scripted_gateway() -> Gateway:
    return Gateway(ScriptedBackend(), embedding_dim=32)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed"):
        for report in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py" in report.nodeid:
                name = report.nodeid.split("::")[-1]
                lines.append((name, outcome))
    if not lines:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in sorted(lines):
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
