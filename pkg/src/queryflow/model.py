"""Core domain types and the structured text format exchanged with the model.

Workflows travel between the model and this package in a labeled-sections
text format::

    THOUGHT:
    <free prose>

    STEP 1: <task description>
    <step description>

    STEP 2: <task description>
    <step description>

``parse_workflow`` and ``render_workflow`` are inverse on any valid
(thought, workflow) pair. Lines matching the ``STEP n:`` header pattern are
reserved and must not occur inside thought or step texts.
"""

from __future__ import annotations

import functools
import json
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import MalformedOutput

DEFAULT_EMBEDDING_DIM = 1536


@functools.total_ordering
class ComplexityLevel(Enum):
    """The four query complexity levels, ordered from simplest to hardest."""

    SIMPLE = "simple"
    MODERATE = "moderate"
    COMPLEX_SINGLE_GOAL = "complex_single_goal"
    MULTI_GOAL = "multi_goal"

    @property
    def rank(self) -> int:
        return _LEVEL_ORDER[self]

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, ComplexityLevel):
            return NotImplemented
        return self.rank < other.rank

    @classmethod
    def from_value(cls, value: str) -> "ComplexityLevel":
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"unknown complexity level {value!r}") from None


_LEVEL_ORDER = {level: i for i, level in enumerate(ComplexityLevel)}


class QueryOrigin(Enum):
    GENERATED = "generated"
    USER_SUBMITTED = "user_submitted"


class StepCategory(Enum):
    """Routing category of a workflow step in the distillation pipeline."""

    ANALYSIS = "Analysis"
    OUTPUT = "Output"
    DATA = "Data"


def _require_text(value: str, name: str) -> None:
    if not isinstance(value, str) or not value.strip():
        raise ValueError(f"{name} must be non-empty text")


@dataclass(frozen=True, slots=True)
class ScopeDescription:
    """Concise statement of the analytics domain, used as fixed prompt context."""

    title: str
    text: str

    def __post_init__(self) -> None:
        _require_text(self.title, "title")
        _require_text(self.text, "text")


@dataclass(frozen=True, slots=True)
class Query:
    id: str
    text: str
    level: ComplexityLevel
    origin: QueryOrigin

    def __post_init__(self) -> None:
        _require_text(self.id, "query id")
        _require_text(self.text, "query text")


@dataclass(frozen=True, slots=True)
class WorkflowStep:
    """One single-goal step: a title phrase plus detailed prose.

    Texts are stripped of surrounding whitespace on construction so the
    text format round-trips exactly.
    """

    index: int
    task_description: str
    step_description: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "task_description", self.task_description.strip())
        object.__setattr__(self, "step_description", self.step_description.strip())
        if self.index < 1:
            raise ValueError("step index must be >= 1")
        _require_text(self.task_description, "task_description")
        _require_text(self.step_description, "step_description")


@dataclass(frozen=True, slots=True)
class Workflow:
    steps: tuple[WorkflowStep, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise ValueError("workflow must have at least one step")
        for position, step in enumerate(self.steps, start=1):
            if step.index != position:
                raise ValueError(
                    f"step indices must be contiguous from 1; found {step.index} at position {position}"
                )

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True, slots=True)
class Thought:
    """The model's articulated reasoning about a query.

    Empty text is legal only for the thoughtless ablation mode.
    """

    text: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "text", self.text.strip())

    def __bool__(self) -> bool:
        return bool(self.text)


@dataclass(frozen=True, slots=True)
class EmbeddingVector:
    """Fixed-dimension real vector; all similarity operations consume these."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError("embedding vector must not be empty")
        if not np.isfinite(np.asarray(self.values)).all():
            raise ValueError("embedding vector contains non-finite values")

    @property
    def dim(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    @classmethod
    def of(cls, values: Iterable[float]) -> "EmbeddingVector":
        return cls(tuple(values))


@dataclass(frozen=True, slots=True)
class TermTuple:
    """Representative terms extracted from one workflow step.

    Actions are single lowercase words; all fields are lowercase-normalized
    on construction.
    """

    overall_action: str
    action: str
    object: str
    attributes: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "overall_action", self.overall_action.strip().lower())
        object.__setattr__(self, "action", self.action.strip().lower())
        object.__setattr__(self, "object", self.object.strip().lower())
        object.__setattr__(
            self, "attributes", tuple(a.strip().lower() for a in self.attributes)
        )
        for name in ("overall_action", "action"):
            value = getattr(self, name)
            _require_text(value, name)
            if any(ch.isspace() for ch in value):
                raise ValueError(f"{name} must be a single word, got {value!r}")

    def as_list(self) -> list:
        return [self.overall_action, self.action, self.object, list(self.attributes)]


@dataclass(frozen=True, slots=True)
class ApiParameter:
    name: str
    type: str
    description: str


@dataclass(frozen=True, slots=True)
class ProvenanceEntry:
    query_id: str
    step_index: int
    reused: bool


@dataclass(frozen=True, slots=True)
class ApiFunctionSpec:
    """One distilled backend function, with the steps it supports."""

    name: str
    purpose: str
    parameters: tuple[ApiParameter, ...]
    category: StepCategory
    action_group: str
    provenance: tuple[ProvenanceEntry, ...]

    def __post_init__(self) -> None:
        if self.category is StepCategory.DATA:
            raise ValueError("Data steps are handled by the data agent, not API functions")
        if not self.provenance:
            raise ValueError("an API function needs at least one provenance entry")

    def with_provenance(self, entry: ProvenanceEntry) -> "ApiFunctionSpec":
        return replace(self, provenance=self.provenance + (entry,))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "purpose": self.purpose,
            "parameters": [
                {"name": p.name, "type": p.type, "description": p.description}
                for p in self.parameters
            ],
            "category": self.category.value,
            "action_group": self.action_group,
            "provenance": [
                {"query_id": e.query_id, "step_index": e.step_index, "reused": e.reused}
                for e in self.provenance
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ApiFunctionSpec":
        return cls(
            name=data["name"],
            purpose=data["purpose"],
            parameters=tuple(
                ApiParameter(p["name"], p["type"], p["description"])
                for p in data["parameters"]
            ),
            category=StepCategory(data["category"]),
            action_group=data["action_group"],
            provenance=tuple(
                ProvenanceEntry(e["query_id"], e["step_index"], e["reused"])
                for e in data["provenance"]
            ),
        )


def now_rfc3339() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def parse_rfc3339(value: str) -> datetime:
    # Python 3.10 fromisoformat does not accept a trailing Z.
    return datetime.fromisoformat(value.replace("Z", "+00:00"))


@dataclass(frozen=True, slots=True)
class QueryWorkflowRecord:
    """One accepted query-workflow pair; the unit stored in the example store."""

    query: Query
    thought: Thought
    workflow: Workflow
    id: int | None = None
    query_embedding: EmbeddingVector | None = None
    thought_embedding: EmbeddingVector | None = None
    step_embeddings: tuple[EmbeddingVector, ...] | None = None
    created_at: str = field(default_factory=now_rfc3339)
    accepted: bool = True

    def __post_init__(self) -> None:
        if self.step_embeddings is not None:
            object.__setattr__(self, "step_embeddings", tuple(self.step_embeddings))

    def to_dict(self) -> dict:
        data: dict[str, Any] = {
            "id": self.id,
            "query": {
                "id": self.query.id,
                "text": self.query.text,
                "level": self.query.level.value,
                "origin": self.query.origin.value,
            },
            "thought": self.thought.text,
            "workflow": {
                "steps": [
                    {
                        "index": s.index,
                        "task_description": s.task_description,
                        "step_description": s.step_description,
                    }
                    for s in self.workflow.steps
                ]
            },
        }
        if (
            self.query_embedding is not None
            or self.thought_embedding is not None
            or self.step_embeddings is not None
        ):
            data["embeddings"] = {
                "query": list(self.query_embedding.values)
                if self.query_embedding
                else None,
                "thought": list(self.thought_embedding.values)
                if self.thought_embedding
                else None,
                "steps": [list(e.values) for e in self.step_embeddings]
                if self.step_embeddings is not None
                else None,
            }
        data["created_at"] = self.created_at
        data["accepted"] = self.accepted
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "QueryWorkflowRecord":
        query = data["query"]
        embeddings = data.get("embeddings") or {}
        steps = embeddings.get("steps")
        return cls(
            id=data.get("id"),
            query=Query(
                id=query["id"],
                text=query["text"],
                level=ComplexityLevel.from_value(query["level"]),
                origin=QueryOrigin(query["origin"]),
            ),
            thought=Thought(data["thought"]),
            workflow=Workflow(
                tuple(
                    WorkflowStep(s["index"], s["task_description"], s["step_description"])
                    for s in data["workflow"]["steps"]
                )
            ),
            query_embedding=EmbeddingVector.of(embeddings["query"])
            if embeddings.get("query")
            else None,
            thought_embedding=EmbeddingVector.of(embeddings["thought"])
            if embeddings.get("thought")
            else None,
            step_embeddings=tuple(EmbeddingVector.of(v) for v in steps)
            if steps is not None
            else None,
            created_at=data["created_at"],
            accepted=bool(data["accepted"]),
        )

    @classmethod
    def from_json(cls, raw: str) -> "QueryWorkflowRecord":
        return cls.from_dict(json.loads(raw))


def step_embedding_text(step: WorkflowStep) -> str:
    """Text embedded for one step: task and detail concatenated."""
    return f"{step.task_description} {step.step_description}"


@dataclass(frozen=True, slots=True)
class Violation:
    code: str
    detail: str

    def __str__(self) -> str:
        return f"{self.code}: {self.detail}"


def validate_record(
    record: "QueryWorkflowRecord | Mapping[str, Any]",
    embedding_dim: int = DEFAULT_EMBEDDING_DIM,
) -> list[Violation]:
    """Check a record (or its raw dict form) against all type invariants.

    Returns an empty list when everything holds. Dict input lets callers
    validate payloads that the strict constructors would reject outright.
    """
    if isinstance(record, QueryWorkflowRecord):
        return _validate_built(record, embedding_dim)
    return _validate_raw(record, embedding_dim)


def _validate_built(record: QueryWorkflowRecord, dim: int) -> list[Violation]:
    violations: list[Violation] = []
    for label, emb in (
        ("query", record.query_embedding),
        ("thought", record.thought_embedding),
    ):
        if emb is not None and emb.dim != dim:
            violations.append(
                Violation("DimensionMismatch", f"{label} embedding has dim {emb.dim}, expected {dim}")
            )
    if record.step_embeddings is not None:
        if len(record.step_embeddings) != len(record.workflow.steps):
            violations.append(
                Violation(
                    "DimensionMismatch",
                    f"{len(record.step_embeddings)} step embeddings for {len(record.workflow.steps)} steps",
                )
            )
        for i, emb in enumerate(record.step_embeddings, start=1):
            if emb.dim != dim:
                violations.append(
                    Violation("DimensionMismatch", f"step {i} embedding has dim {emb.dim}, expected {dim}")
                )
    try:
        parse_rfc3339(record.created_at)
    except ValueError:
        violations.append(Violation("BadTimestamp", f"created_at {record.created_at!r} is not RFC3339"))
    return violations


def _validate_raw(data: Mapping[str, Any], dim: int) -> list[Violation]:
    violations: list[Violation] = []
    query = data.get("query") or {}
    if not str(query.get("text", "")).strip():
        violations.append(Violation("EmptyQueryText", "query text is empty"))
    if not str(query.get("id", "")).strip():
        violations.append(Violation("EmptyQueryId", "query id is empty"))
    try:
        ComplexityLevel.from_value(query.get("level", ""))
    except ValueError:
        violations.append(Violation("BadLevel", f"unknown level {query.get('level')!r}"))
    steps = (data.get("workflow") or {}).get("steps") or []
    if not steps:
        violations.append(Violation("EmptyWorkflow", "workflow has no steps"))
    for position, step in enumerate(steps, start=1):
        if step.get("index") != position:
            violations.append(
                Violation("NonContiguousSteps", f"step at position {position} has index {step.get('index')}")
            )
            break
    for step in steps:
        if not str(step.get("task_description", "")).strip():
            violations.append(Violation("EmptyTaskDescription", f"step {step.get('index')} has no task description"))
        if not str(step.get("step_description", "")).strip():
            violations.append(Violation("EmptyStepDescription", f"step {step.get('index')} has no step description"))
    embeddings = data.get("embeddings") or {}
    for label in ("query", "thought"):
        vec = embeddings.get(label)
        if vec is not None and len(vec) != dim:
            violations.append(
                Violation("DimensionMismatch", f"{label} embedding has dim {len(vec)}, expected {dim}")
            )
    step_vecs = embeddings.get("steps")
    if step_vecs is not None:
        for i, vec in enumerate(step_vecs, start=1):
            if len(vec) != dim:
                violations.append(
                    Violation("DimensionMismatch", f"step {i} embedding has dim {len(vec)}, expected {dim}")
                )
    created_at = data.get("created_at")
    if created_at is not None:
        try:
            parse_rfc3339(str(created_at))
        except ValueError:
            violations.append(Violation("BadTimestamp", f"created_at {created_at!r} is not RFC3339"))
    return violations


_STEP_HEADER = re.compile(r"^STEP\s+(\d+):\s*(.*)$")
_THOUGHT_HEADER = re.compile(r"^THOUGHT:\s*(.*)$")
_FENCE = re.compile(r"^```[\w-]*\s*$")


def _strip_fence(text: str) -> str:
    lines = text.strip().splitlines()
    if len(lines) >= 2 and _FENCE.match(lines[0]) and lines[-1].strip() == "```":
        return "\n".join(lines[1:-1])
    return text


def parse_workflow(raw_text: str) -> tuple[Thought, Workflow]:
    """Parse a model response in the labeled-sections format.

    The THOUGHT section is optional (absent in thoughtless mode). Raises
    MalformedOutput when no steps are found, a step lacks its texts, or
    step numbering is not contiguous from 1.
    """
    lines = _strip_fence(raw_text).splitlines()
    thought_lines: list[str] = []
    in_thought = False
    steps: list[tuple[int, str, list[str]]] = []

    for line in lines:
        header = _STEP_HEADER.match(line)
        if header:
            in_thought = False
            steps.append((int(header.group(1)), header.group(2), []))
            continue
        thought_header = _THOUGHT_HEADER.match(line)
        if thought_header and not steps and not in_thought:
            in_thought = True
            if thought_header.group(1):
                thought_lines.append(thought_header.group(1))
            continue
        if steps:
            steps[-1][2].append(line)
        elif in_thought:
            thought_lines.append(line)

    if not steps:
        raise MalformedOutput("no STEP sections found")
    for position, (index, task, _) in enumerate(steps, start=1):
        if index != position:
            raise MalformedOutput(
                f"step indices must be contiguous from 1; found {index} at position {position}"
            )
        if not task.strip():
            raise MalformedOutput(f"step {index} has an empty task description")
        if not "\n".join(steps[position - 1][2]).strip():
            raise MalformedOutput(f"step {index} has an empty step description")

    thought = Thought("\n".join(thought_lines))
    workflow = Workflow(
        tuple(
            WorkflowStep(index, task, "\n".join(body))
            for index, task, body in steps
        )
    )
    return thought, workflow


def render_workflow(thought: Thought, workflow: Workflow) -> str:
    """Render a (thought, workflow) pair in the canonical text format.

    Inverse of parse_workflow. The THOUGHT section is omitted when the
    thought is empty.
    """
    sections: list[str] = []
    if thought.text:
        sections.append(f"THOUGHT:\n{thought.text}")
    for step in workflow.steps:
        sections.append(f"STEP {step.index}: {step.task_description}\n{step.step_description}")
    return "\n\n".join(sections)
