"""The iterative retrieve-reason loop with thought-similarity convergence.

Each iteration retrieves in-context examples (by query embedding first,
by the previous thought afterwards), asks the reasoner model for a
(thought, workflow) pair, and stops once two consecutive thoughts embed
close enough. The final workflow waits for a human decision; only an
accepted pair enters the store.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from enum import Enum

from .errors import InvalidState, QueryflowError
from .gateway import Gateway
from .model import (
    EmbeddingVector,
    Query,
    QueryWorkflowRecord,
    ScopeDescription,
    Thought,
    Workflow,
    now_rfc3339,
    parse_workflow,
)
from .prompts import PromptSuite, default_suite
from .similarity import cosine, top_k
from .store import ExampleStore

DEFAULT_CONVERGENCE_THRESHOLD = 0.9
DEFAULT_MAX_ITERATIONS = 5


@dataclass(frozen=True, slots=True)
class AgentConfig:
    icl_k: int = 4
    convergence_threshold: float = DEFAULT_CONVERGENCE_THRESHOLD
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    with_thought: bool = True

    def __post_init__(self) -> None:
        if self.icl_k < 1:
            raise ValueError("icl_k must be positive")
        if not 0.0 < self.convergence_threshold <= 1.0:
            raise ValueError("convergence_threshold must be in (0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


class RunStatus(Enum):
    RUNNING = "running"
    AWAITING_DECISION = "awaiting_decision"
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    FAILED = "failed"

    def is_terminal(self) -> bool:
        return self in (RunStatus.ACCEPTED, RunStatus.REJECTED, RunStatus.FAILED)


@dataclass(frozen=True, slots=True)
class IterationRecord:
    retrieved_ids: tuple[int, ...]
    thought: Thought
    workflow: Workflow


@dataclass
class RunState:
    """Observable state of one agent run; appended to as iterations finish."""

    query: Query
    run_id: str = field(default_factory=lambda: f"run-{uuid.uuid4().hex[:12]}")
    iterations: list[IterationRecord] = field(default_factory=list)
    converged: bool = False
    status: RunStatus = RunStatus.RUNNING
    failure_reason: str | None = None
    created_at: str = field(default_factory=now_rfc3339)

    @property
    def iteration_count(self) -> int:
        return len(self.iterations)

    @property
    def final_thought(self) -> Thought | None:
        return self.iterations[-1].thought if self.iterations else None

    @property
    def final_workflow(self) -> Workflow | None:
        return self.iterations[-1].workflow if self.iterations else None

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "query": {
                "id": self.query.id,
                "text": self.query.text,
                "level": self.query.level.value,
                "origin": self.query.origin.value,
            },
            "iterations": [
                {
                    "retrieved_ids": list(it.retrieved_ids),
                    "thought": it.thought.text,
                    "workflow": {
                        "steps": [
                            {
                                "index": s.index,
                                "task_description": s.task_description,
                                "step_description": s.step_description,
                            }
                            for s in it.workflow.steps
                        ]
                    },
                }
                for it in self.iterations
            ],
            "converged": self.converged,
            "status": self.status.value,
            "failure_reason": self.failure_reason,
            "created_at": self.created_at,
        }


class Decision(Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    ACCEPT_EDITED = "accept_edited"


def thoughts_converged(
    prev: Thought, cur: Thought, threshold: float, gateway: Gateway
) -> bool:
    """True iff the two thoughts' embeddings reach the cosine threshold."""
    if not prev.text or not cur.text:
        raise ValueError("convergence needs two non-empty thoughts")
    prev_vec, cur_vec = gateway.embed([prev.text, cur.text])
    return cosine(prev_vec, cur_vec) >= threshold


def _retrieve(
    store: ExampleStore,
    probe: EmbeddingVector,
    index_field: str,
    k: int,
) -> list[QueryWorkflowRecord]:
    if len(store) == 0:
        return []
    index = store.build_index(index_field)  # type: ignore[arg-type]
    records = []
    for record_id in top_k(probe, index, k=k):
        record = store.get(record_id)
        assert record is not None
        records.append(record)
    return records


def run(
    query: Query,
    store: ExampleStore,
    gateway: Gateway,
    config: AgentConfig,
    scope: ScopeDescription,
    suite: PromptSuite | None = None,
    state: RunState | None = None,
) -> RunState:
    """Execute the deliberation loop for one query.

    Iteration 0 retrieves examples by query-embedding similarity; later
    iterations retrieve by the previous thought. The loop ends when two
    consecutive thoughts reach the convergence threshold or the iteration
    bound is hit, whichever comes first; the last pair is surfaced either
    way. Each model call gets one retry; a second failure ends the run as
    FAILED. Thoughtless runs have no convergence signal and do a single
    pass.

    The store is never mutated here; that happens on an accept decision.
    """
    suite = suite or default_suite()
    state = state or RunState(query=query)
    state.status = RunStatus.RUNNING

    try:
        query_embedding = gateway.embed([query.text])[0]
    except QueryflowError as exc:
        state.status = RunStatus.FAILED
        state.failure_reason = f"query embedding failed: {exc}"
        return state

    prev_embedding: EmbeddingVector | None = None
    max_iterations = config.max_iterations if config.with_thought else 1

    for iteration in range(max_iterations):
        store.ensure_embeddings(gateway)
        if iteration == 0:
            icl = _retrieve(store, query_embedding, "query", config.icl_k)
        else:
            assert prev_embedding is not None
            icl = _retrieve(store, prev_embedding, "thought", config.icl_k)
        request = suite.build_workflow_prompt(
            scope, icl, query, with_thought=config.with_thought, icl_max=config.icl_k
        )

        try:
            thought, workflow = _call_with_one_retry(gateway, request, config.with_thought)
        except QueryflowError as exc:
            state.status = RunStatus.FAILED
            state.failure_reason = str(exc)
            return state

        state.iterations.append(
            IterationRecord(
                retrieved_ids=tuple(r.id for r in icl if r.id is not None),
                thought=thought,
                workflow=workflow,
            )
        )

        if not config.with_thought:
            break
        try:
            cur_embedding = gateway.embed([thought.text])[0]
        except QueryflowError as exc:
            state.status = RunStatus.FAILED
            state.failure_reason = f"thought embedding failed: {exc}"
            return state
        if prev_embedding is not None and (
            cosine(prev_embedding, cur_embedding) >= config.convergence_threshold
        ):
            state.converged = True
            break
        prev_embedding = cur_embedding

    state.status = RunStatus.AWAITING_DECISION
    return state


def _call_with_one_retry(
    gateway: Gateway, request, with_thought: bool
) -> tuple[Thought, Workflow]:
    last_error: QueryflowError | None = None
    for _ in range(2):
        try:
            raw = gateway.chat(request)
            thought, workflow = parse_workflow(raw)
            if with_thought and not thought.text:
                raise QueryflowError("response is missing the required thought")
            return thought, workflow
        except QueryflowError as exc:
            last_error = exc
    assert last_error is not None
    raise last_error


def decide(
    state: RunState,
    decision: Decision,
    store: ExampleStore,
    edited_workflow: Workflow | None = None,
) -> RunState:
    """Apply the human decision to a run awaiting one.

    Accept (optionally with an edited workflow) appends the record to the
    store; reject is logged to the audit file only.
    """
    if state.status is not RunStatus.AWAITING_DECISION:
        raise InvalidState(f"run {state.run_id} is {state.status.value}, not awaiting a decision")
    if decision is Decision.ACCEPT_EDITED and edited_workflow is None:
        raise InvalidState("accept_edited needs the edited workflow")

    workflow = edited_workflow if decision is Decision.ACCEPT_EDITED else state.final_workflow
    assert workflow is not None and state.final_thought is not None
    record = QueryWorkflowRecord(
        query=state.query,
        thought=state.final_thought,
        workflow=workflow,
        created_at=now_rfc3339(),
        accepted=True,
    )
    if decision is Decision.REJECT:
        store.log_rejection(record)
        state.status = RunStatus.REJECTED
    else:
        store.append(record)
        state.status = RunStatus.ACCEPTED
    return state
