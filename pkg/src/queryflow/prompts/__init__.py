"""Deterministic construction of every prompt family.

Templates are plain text files with $name slots, shipped as package data
and overridable via a template directory. Builders are pure: equal inputs
render byte-identical prompts, and in-context examples appear in exactly
the order given (retrieval rank order is preserved end-to-end).
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from ..errors import GroupTooLarge
from ..model import (
    Query,
    QueryWorkflowRecord,
    ScopeDescription,
    TermTuple,
    Thought,
    WorkflowStep,
    render_workflow,
)
from ..gateway import ChatMessage, ChatRequest, ModelRole

DEFAULT_ICL_CAPACITY = 4
DEFAULT_STEP_BUDGET = 60


class PromptFamily(Enum):
    QUERY_GEN = "query_gen"
    WORKFLOW_GEN = "workflow_gen"
    WORKFLOW_GEN_THOUGHTLESS = "workflow_gen_thoughtless"
    TERM_EXTRACT = "term_extract"
    CLASSIFY = "classify"
    API_GEN = "api_gen"
    DATA_AGENT = "data_agent"


_FAMILY_ROLES = {
    PromptFamily.QUERY_GEN: ModelRole.GENERATOR,
    PromptFamily.WORKFLOW_GEN: ModelRole.REASONER,
    PromptFamily.WORKFLOW_GEN_THOUGHTLESS: ModelRole.REASONER,
    PromptFamily.TERM_EXTRACT: ModelRole.GENERATOR,
    PromptFamily.CLASSIFY: ModelRole.GENERATOR,
    PromptFamily.API_GEN: ModelRole.CODER,
    PromptFamily.DATA_AGENT: ModelRole.GENERATOR,
}

_SECTION_MARK = "=== SYSTEM ===\n"
_USER_MARK = "\n=== USER ===\n"


@dataclass(frozen=True)
class PromptTemplate:
    family: PromptFamily
    system_template: string.Template
    user_template: string.Template

    def render(self, slots: Mapping[str, str], role: ModelRole) -> ChatRequest:
        return ChatRequest(
            role=role,
            messages=(
                ChatMessage("system", self.system_template.safe_substitute(slots)),
                ChatMessage("user", self.user_template.substitute(slots)),
            ),
        )


def _parse_template(family: PromptFamily, raw: str) -> PromptTemplate:
    if not raw.startswith(_SECTION_MARK) or _USER_MARK not in raw:
        raise ValueError(f"template {family.value} lacks SYSTEM/USER sections")
    body = raw[len(_SECTION_MARK):]
    system_text, user_text = body.split(_USER_MARK, 1)
    return PromptTemplate(
        family=family,
        system_template=string.Template(system_text.strip()),
        user_template=string.Template(user_text),
    )


class PromptSuite:
    """Loads the template set once and renders every prompt family."""

    def __init__(self, template_dir: str | Path | None = None):
        self._templates: dict[PromptFamily, PromptTemplate] = {}
        for family in PromptFamily:
            name = f"{family.value}.txt"
            if template_dir is not None:
                raw = (Path(template_dir) / name).read_text(encoding="utf-8")
            else:
                raw = (
                    resources.files(__package__).joinpath("templates", name)
                    .read_text(encoding="utf-8")
                )
            self._templates[family] = _parse_template(family, raw)

    def template(self, family: PromptFamily) -> PromptTemplate:
        return self._templates[family]

    def _render(self, family: PromptFamily, slots: Mapping[str, str]) -> ChatRequest:
        return self._templates[family].render(slots, _FAMILY_ROLES[family])

    def build_query_gen_prompt(
        self,
        scope: ScopeDescription,
        icl: Sequence[Query] = (),
        per_level: int = 20,
    ) -> ChatRequest:
        """Query-generation prompt: per_level queries at each of four levels.

        At most one in-context example per level; zero examples is a valid
        zero-shot prompt.
        """
        if per_level < 1:
            raise ValueError("per_level must be positive")
        seen_levels = set()
        for query in icl:
            if query.level in seen_levels:
                raise ValueError(f"more than one example for level {query.level.value}")
            seen_levels.add(query.level)
        icl_block = ""
        if icl:
            lines = "\n".join(f"{q.level.name}: {q.text}" for q in icl)
            icl_block = f"\nExamples of the expected style:\n\n{lines}"
        return self._render(
            PromptFamily.QUERY_GEN,
            {
                "title": scope.title,
                "scope_text": scope.text,
                "per_level": str(per_level),
                "icl_block": icl_block,
            },
        )

    def build_workflow_prompt(
        self,
        scope: ScopeDescription,
        icl: Sequence[QueryWorkflowRecord],
        query: Query,
        with_thought: bool = True,
        icl_max: int = DEFAULT_ICL_CAPACITY,
    ) -> ChatRequest:
        """Workflow-generation prompt with 0..icl_max in-context records.

        Records render as (query, thought, workflow) blocks in the given
        order; with_thought=False drops the thought instruction and the
        example thoughts.
        """
        if len(icl) > icl_max:
            raise ValueError(f"at most {icl_max} in-context examples, got {len(icl)}")
        family = (
            PromptFamily.WORKFLOW_GEN
            if with_thought
            else PromptFamily.WORKFLOW_GEN_THOUGHTLESS
        )
        icl_block = ""
        if icl:
            blocks = []
            for record in icl:
                thought = record.thought if with_thought else Thought("")
                blocks.append(
                    f"EXAMPLE\nQUERY: {record.query.text}\n"
                    + render_workflow(thought, record.workflow)
                )
            joined = "\n\n".join(blocks)
            icl_block = (
                "\nHere are examples of queries with accepted plans. Keep the"
                f" structure and wording style of these examples.\n\n{joined}\n"
            )
        return self._render(
            family,
            {
                "title": scope.title,
                "scope_text": scope.text,
                "icl_block": icl_block,
                "query": query.text,
            },
        )

    def build_term_extraction_prompt(self, step: WorkflowStep) -> ChatRequest:
        return self._render(
            PromptFamily.TERM_EXTRACT,
            {"task": step.task_description, "detail": step.step_description},
        )

    def build_classification_prompt(self, step: WorkflowStep, terms: TermTuple) -> ChatRequest:
        return self._render(
            PromptFamily.CLASSIFY,
            {
                "task": step.task_description,
                "detail": step.step_description,
                "terms": json.dumps(terms.as_list(), ensure_ascii=False),
            },
        )

    def build_api_gen_prompt(
        self,
        group_label: str,
        steps: Sequence[tuple[str, int, TermTuple, WorkflowStep]],
        existing: Sequence = (),
        step_budget: int = DEFAULT_STEP_BUDGET,
    ) -> ChatRequest:
        """API-generation prompt for one action group.

        ``steps`` entries are (query id, step index, terms, step); the
        rendered step key is ``<query id>#<step index>``. Groups above the
        step budget must be split by the caller.
        """
        if not steps:
            raise ValueError("an action group prompt needs at least one step")
        if len(steps) > step_budget:
            raise GroupTooLarge(
                f"group {group_label!r} has {len(steps)} steps; budget is {step_budget}"
            )
        if existing:
            existing_block = "\n".join(f"- {f.name}: {f.purpose}" for f in existing)
        else:
            existing_block = "(none)"
        step_lines = []
        for query_id, step_index, terms, step in steps:
            detail = " ".join(step.step_description.split())
            step_lines.append(
                f"- [{query_id}#{step_index}] action={terms.action}"
                f" | task: {step.task_description} | detail: {detail}"
            )
        return self._render(
            PromptFamily.API_GEN,
            {
                "group_label": group_label,
                "existing_block": existing_block,
                "steps_block": "\n".join(step_lines),
            },
        )

    def build_data_agent_prompt(
        self,
        schema_text: str,
        step: WorkflowStep,
        bindings: Mapping[str, str] | None = None,
    ) -> ChatRequest:
        if not schema_text.strip():
            raise ValueError("schema text must be non-empty")
        bindings = bindings or {}
        if bindings:
            bindings_block = "\n".join(f"- {k} = {v}" for k, v in sorted(bindings.items()))
        else:
            bindings_block = "(none)"
        return self._render(
            PromptFamily.DATA_AGENT,
            {
                "schema": schema_text,
                "task": step.task_description,
                "detail": step.step_description,
                "bindings_block": bindings_block,
            },
        )


_default_suite: PromptSuite | None = None


def default_suite() -> PromptSuite:
    global _default_suite
    if _default_suite is None:
        _default_suite = PromptSuite()
    return _default_suite
