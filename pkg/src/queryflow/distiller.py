"""Distills the example store into a structured backend API specification.

Pipeline: per-step term extraction, three-way classification, action-group
consolidation, and per-group API-function generation with reuse against the
functions already in the catalog. Analysis and Output steps become function
specifications; Data steps route to the data agent. An incremental run
chains on a baseline report: it processes only new records, keeps the
established group structure, and never deletes or renames an existing
function.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .data_agent import DataCodeArtifact, GraphSchema, generate_data_code
from .errors import MappingIncomplete, QueryflowError, SchemaViolation
from .gateway import Gateway
from .model import (
    ApiFunctionSpec,
    ApiParameter,
    ProvenanceEntry,
    StepCategory,
    TermTuple,
    WorkflowStep,
)
from .prompts import DEFAULT_STEP_BUDGET, PromptSuite, default_suite
from .store import ExampleStore

DEFAULT_KEEP_TOP_GROUPS = 8
OTHERS_LABEL = "others"

_FENCED_JSON = re.compile(r"```[\w-]*\n(.*?)```", re.DOTALL)


@dataclass(frozen=True, slots=True)
class ClassifiedStep:
    query_id: str
    step_index: int
    step: WorkflowStep
    terms: TermTuple
    category: StepCategory

    @property
    def key(self) -> tuple[str, int]:
        return (self.query_id, self.step_index)


@dataclass(frozen=True, slots=True)
class ActionGroup:
    label: str
    steps: tuple[ClassifiedStep, ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise ValueError("an action group needs at least one step")


def _strip_json(response: str) -> str:
    match = _FENCED_JSON.search(response)
    return match.group(1) if match else response


def extract_terms(
    step: WorkflowStep, gateway: Gateway, suite: PromptSuite | None = None
) -> TermTuple:
    """Extract the four-element term list for one step; one retry, then reject."""
    suite = suite or default_suite()
    request = suite.build_term_extraction_prompt(step)
    last_reason = ""
    for _ in range(2):
        response = gateway.chat(request)
        try:
            return _parse_terms(response)
        except (ValueError, TypeError, json.JSONDecodeError) as exc:
            last_reason = str(exc)
    raise SchemaViolation(f"term extraction failed for step {step.index}: {last_reason}")


def _parse_terms(response: str) -> TermTuple:
    data = json.loads(_strip_json(response).strip())
    if not isinstance(data, list) or len(data) != 4:
        raise ValueError(f"expected a 4-element JSON list, got {data!r}")
    overall_action, action, obj, attributes = data
    if isinstance(attributes, str):
        attributes = [attributes]
    if not isinstance(attributes, list):
        raise ValueError("attributes must be a list or a string")
    return TermTuple(
        overall_action=str(overall_action),
        action=str(action),
        object=str(obj),
        attributes=tuple(str(a) for a in attributes),
    )


def classify_step(
    step: WorkflowStep,
    terms: TermTuple,
    gateway: Gateway,
    suite: PromptSuite | None = None,
) -> StepCategory:
    """Classify one step as Analysis, Output, or Data; one retry, then reject."""
    suite = suite or default_suite()
    request = suite.build_classification_prompt(step, terms)
    labels = {c.value.lower(): c for c in StepCategory}
    last_response = ""
    for _ in range(2):
        last_response = gateway.chat(request).strip()
        category = labels.get(last_response.lower())
        if category is not None:
            return category
    raise SchemaViolation(
        f"classification for step {step.index} returned {last_response!r},"
        " expected Analysis, Output, or Data"
    )


def group_by_action(
    steps: Sequence[ClassifiedStep],
    keep_top: int = DEFAULT_KEEP_TOP_GROUPS,
    fixed_labels: Sequence[str] | None = None,
) -> list[ActionGroup]:
    """Group steps by their action term.

    Fresh grouping keeps the keep_top largest groups (ties broken by label)
    and consolidates the rest into "others", which exists only when there
    are more than keep_top distinct actions. With fixed_labels (an already
    established group structure), steps bucket into those labels and
    everything else goes to "others".
    """
    if not steps:
        raise ValueError("group_by_action needs at least one step")
    by_action: dict[str, list[ClassifiedStep]] = {}
    for step in steps:
        by_action.setdefault(step.terms.action, []).append(step)

    if fixed_labels is not None:
        kept_labels = [label for label in fixed_labels if label != OTHERS_LABEL]
    else:
        ranked = sorted(by_action.items(), key=lambda kv: (-len(kv[1]), kv[0]))
        kept_labels = [label for label, _ in ranked[:keep_top]]

    groups: list[ActionGroup] = []
    others: list[ClassifiedStep] = []
    for label in kept_labels:
        if label in by_action:
            groups.append(ActionGroup(label, tuple(by_action[label])))
    kept_set = set(kept_labels)
    for step in steps:
        if step.terms.action not in kept_set:
            others.append(step)
    if others:
        groups.append(ActionGroup(OTHERS_LABEL, tuple(others)))
    return groups


@dataclass(slots=True)
class GroupGenerationResult:
    new_functions: list[ApiFunctionSpec]
    step_map: dict[tuple[str, int], tuple[str, bool]]  # key -> (function, reused)


def generate_group_api(
    group: ActionGroup,
    existing: Sequence[ApiFunctionSpec],
    gateway: Gateway,
    suite: PromptSuite | None = None,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> GroupGenerationResult:
    """Map every step of one group to an existing or new API function.

    Oversized groups are split into budget-sized chunks in provenance
    order; later chunks see the functions emitted by earlier ones, so
    within-group reuse is preserved. A mapping is reused when it points at
    a function that existed before this call. New-function definitions the
    model returns without mapping any step to them are dropped. One retry
    per chunk, then MappingIncomplete.
    """
    suite = suite or default_suite()
    category = group.steps[0].category
    preexisting = {f.name for f in existing}
    context: list[ApiFunctionSpec] = list(existing)
    new_specs: dict[str, ApiFunctionSpec] = {}
    step_map: dict[tuple[str, int], tuple[str, bool]] = {}

    chunks = [
        group.steps[i : i + step_budget]
        for i in range(0, len(group.steps), step_budget)
    ]
    for chunk in chunks:
        request = suite.build_api_gen_prompt(
            group.label,
            [(s.query_id, s.step_index, s.terms, s.step) for s in chunk],
            existing=context,
            step_budget=step_budget,
        )
        parsed = None
        last_reason = ""
        for _ in range(2):
            response = gateway.chat(request)
            try:
                parsed = _parse_api_response(response, chunk, preexisting | set(new_specs))
                break
            except (ValueError, json.JSONDecodeError) as exc:
                last_reason = str(exc)
        if parsed is None:
            raise MappingIncomplete(
                f"group {group.label!r} chunk of {len(chunk)} steps: {last_reason}"
            )
        definitions, mapping = parsed
        # Build new specs with provenance from the mapping, in chunk step order;
        # a redefinition of a known name is treated as reuse of that function.
        chunk_new: dict[str, ApiFunctionSpec] = {}
        for definition in definitions:
            name = definition["name"]
            if name in preexisting or name in new_specs or name in chunk_new:
                continue
            entries = tuple(
                ProvenanceEntry(s.query_id, s.step_index, reused=False)
                for s in chunk
                if mapping[s.key] == name
            )
            if not entries:
                continue  # defined but unused; drop
            chunk_new[name] = ApiFunctionSpec(
                name=name,
                purpose=definition["purpose"],
                parameters=tuple(
                    ApiParameter(p["name"], p["type"], p["description"])
                    for p in definition.get("parameters", [])
                ),
                category=category,
                action_group=group.label,
                provenance=entries,
            )
        for step in chunk:
            name = mapping[step.key]
            if name in preexisting:
                step_map[step.key] = (name, True)
            elif name in chunk_new or name in new_specs:
                step_map[step.key] = (name, False)
                if name in new_specs:
                    new_specs[name] = new_specs[name].with_provenance(
                        ProvenanceEntry(step.query_id, step.step_index, reused=False)
                    )
            else:
                raise MappingIncomplete(
                    f"step {step.query_id}#{step.step_index} mapped to unknown function {name!r}"
                )
        new_specs.update(chunk_new)
        context = list(existing) + list(new_specs.values())

    return GroupGenerationResult(
        new_functions=list(new_specs.values()), step_map=step_map
    )


def _parse_api_response(
    response: str,
    chunk: Sequence[ClassifiedStep],
    known_names: set[str],
) -> tuple[list[dict], dict[tuple[str, int], str]]:
    data = json.loads(_strip_json(response).strip())
    if not isinstance(data, dict):
        raise ValueError("expected a JSON object")
    definitions = data.get("functions")
    raw_mapping = data.get("mapping")
    if not isinstance(definitions, list) or not isinstance(raw_mapping, list):
        raise ValueError('response needs "functions" and "mapping" lists')
    for definition in definitions:
        if not isinstance(definition, dict) or "name" not in definition or "purpose" not in definition:
            raise ValueError(f"malformed function definition {definition!r}")
    defined_names = {d["name"] for d in definitions}

    mapping: dict[tuple[str, int], str] = {}
    for item in raw_mapping:
        step_key = str(item.get("step", ""))
        if "#" not in step_key:
            raise ValueError(f"malformed step key {step_key!r}")
        query_id, _, index_text = step_key.rpartition("#")
        key = (query_id, int(index_text))
        if key in mapping:
            raise ValueError(f"step {step_key} mapped twice")
        mapping[key] = str(item.get("function", ""))

    for step in chunk:
        if step.key not in mapping:
            raise ValueError(f"step {step.query_id}#{step.step_index} left unmapped")
        name = mapping[step.key]
        if name not in known_names and name not in defined_names:
            raise ValueError(
                f"step {step.query_id}#{step.step_index} mapped to unknown function {name!r}"
            )
    return definitions, mapping


@dataclass(slots=True)
class DistillConfig:
    keep_top_groups: int = DEFAULT_KEEP_TOP_GROUPS
    step_budget: int = DEFAULT_STEP_BUDGET
    schema: GraphSchema | None = None
    data_bindings: Mapping[str, str] = field(default_factory=dict)
    slice_label: str | None = None


@dataclass(slots=True)
class GroupStats:
    label: str
    steps: int
    new_functions: int

    def to_dict(self) -> dict:
        return {"label": self.label, "steps": self.steps, "new_functions": self.new_functions}


@dataclass(slots=True)
class SliceReport:
    """Statistics for one distill pass over one set of records."""

    label: str
    query_ids: list[str]
    steps_total: int
    category_counts: dict[str, int]
    new_function_counts: dict[str, int]
    reuse_ratios: dict[str, float]
    groups: dict[str, list[GroupStats]]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "query_ids": self.query_ids,
            "steps_total": self.steps_total,
            "category_counts": self.category_counts,
            "new_function_counts": self.new_function_counts,
            "reuse_ratios": self.reuse_ratios,
            "groups": {
                category: [g.to_dict() for g in stats]
                for category, stats in self.groups.items()
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SliceReport":
        return cls(
            label=data["label"],
            query_ids=list(data["query_ids"]),
            steps_total=data["steps_total"],
            category_counts=dict(data["category_counts"]),
            new_function_counts=dict(data["new_function_counts"]),
            reuse_ratios=dict(data["reuse_ratios"]),
            groups={
                category: [GroupStats(g["label"], g["steps"], g["new_functions"]) for g in stats]
                for category, stats in data["groups"].items()
            },
        )


@dataclass(slots=True)
class DistillReport:
    slices: list[SliceReport]
    functions: list[ApiFunctionSpec]
    failures: list[dict]

    def covered_query_ids(self) -> set[str]:
        covered: set[str] = set()
        for slice_report in self.slices:
            covered.update(slice_report.query_ids)
        return covered

    def to_dict(self) -> dict:
        return {
            "slices": [s.to_dict() for s in self.slices],
            "functions": [f.to_dict() for f in self.functions],
            "failures": self.failures,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)

    @classmethod
    def from_dict(cls, data: Mapping) -> "DistillReport":
        return cls(
            slices=[SliceReport.from_dict(s) for s in data["slices"]],
            functions=[ApiFunctionSpec.from_dict(f) for f in data["functions"]],
            failures=list(data["failures"]),
        )

    @classmethod
    def from_json(cls, raw: str) -> "DistillReport":
        return cls.from_dict(json.loads(raw))


@dataclass(slots=True)
class DistillOutcome:
    report: DistillReport
    data_artifacts: list[DataCodeArtifact]
    data_failures: list[dict]


def distill(
    store: ExampleStore,
    gateway: Gateway,
    config: DistillConfig | None = None,
    baseline: DistillReport | None = None,
    suite: PromptSuite | None = None,
) -> DistillOutcome:
    """Run the full pipeline over the store (or over records new to it).

    With a baseline report, only records not covered by it are processed,
    the established per-category group structure is kept, and generation
    prompts are seeded with the baseline functions, so the catalog only
    grows. Per-step failures are collected; completed slices still emit.
    """
    config = config or DistillConfig()
    suite = suite or default_suite()
    if len(store) == 0:
        raise QueryflowError("the store is empty; nothing to distill")

    covered = baseline.covered_query_ids() if baseline else set()
    records = [r for r in store.records() if r.query.id not in covered]
    if not records:
        raise QueryflowError("every stored record is already covered by the baseline report")

    classified: list[ClassifiedStep] = []
    failures: list[dict] = []
    for record in records:
        for step in record.workflow.steps:
            try:
                terms = extract_terms(step, gateway, suite)
                category = classify_step(step, terms, gateway, suite)
            except QueryflowError as exc:
                failures.append(
                    {
                        "query_id": record.query.id,
                        "step_index": step.index,
                        "stage": "classification",
                        "error": str(exc),
                    }
                )
                continue
            classified.append(
                ClassifiedStep(
                    query_id=record.query.id,
                    step_index=step.index,
                    step=step,
                    terms=terms,
                    category=category,
                )
            )

    functions: dict[str, ApiFunctionSpec] = {}
    creation_order: list[str] = []
    if baseline:
        for spec in baseline.functions:
            functions[spec.name] = spec
            creation_order.append(spec.name)

    category_counts: dict[str, int] = {c.value: 0 for c in StepCategory}
    for step in classified:
        category_counts[step.category.value] += 1

    new_function_counts: dict[str, int] = {}
    reuse_ratios: dict[str, float] = {}
    group_stats: dict[str, list[GroupStats]] = {}

    for category in (StepCategory.ANALYSIS, StepCategory.OUTPUT):
        steps = [s for s in classified if s.category is category]
        if not steps:
            continue
        fixed_labels = _baseline_group_labels(baseline, category) if baseline else None
        groups = group_by_action(
            steps, keep_top=config.keep_top_groups, fixed_labels=fixed_labels
        )
        stats: list[GroupStats] = []
        new_total = 0
        for group in groups:
            existing = [functions[name] for name in creation_order]
            try:
                result = generate_group_api(
                    group, existing, gateway, suite, step_budget=config.step_budget
                )
            except QueryflowError as exc:
                failures.append(
                    {
                        "query_id": "",
                        "step_index": 0,
                        "stage": f"api-generation:{category.value}:{group.label}",
                        "error": str(exc),
                    }
                )
                continue
            for spec in result.new_functions:
                functions[spec.name] = spec
                creation_order.append(spec.name)
            for (query_id, step_index), (name, reused) in result.step_map.items():
                if reused:
                    functions[name] = functions[name].with_provenance(
                        ProvenanceEntry(query_id, step_index, reused=True)
                    )
            stats.append(GroupStats(group.label, len(group.steps), len(result.new_functions)))
            new_total += len(result.new_functions)
        group_stats[category.value] = stats
        new_function_counts[category.value] = new_total
        reuse_ratios[category.value] = new_total / len(steps)

    data_steps = [s for s in classified if s.category is StepCategory.DATA]
    data_artifacts: list[DataCodeArtifact] = []
    data_failures: list[dict] = []
    for step in data_steps:
        if config.schema is None:
            data_failures.append(
                {
                    "query_id": step.query_id,
                    "step_index": step.step_index,
                    "error": "no graph schema configured",
                }
            )
            continue
        try:
            artifact = generate_data_code(
                step.step,
                config.schema,
                dict(config.data_bindings),
                gateway,
                provenance=(step.query_id, step.step_index),
                suite=suite,
            )
            data_artifacts.append(artifact)
        except QueryflowError as exc:
            data_failures.append(
                {
                    "query_id": step.query_id,
                    "step_index": step.step_index,
                    "error": str(exc),
                }
            )

    label = config.slice_label or (
        "initial" if baseline is None else f"incremental-{len(baseline.slices)}"
    )
    slice_report = SliceReport(
        label=label,
        query_ids=[r.query.id for r in records],
        steps_total=len(classified),
        category_counts=category_counts,
        new_function_counts=new_function_counts,
        reuse_ratios=reuse_ratios,
        groups=group_stats,
    )
    report = DistillReport(
        slices=(list(baseline.slices) if baseline else []) + [slice_report],
        functions=[functions[name] for name in creation_order],
        failures=failures,
    )
    return DistillOutcome(report=report, data_artifacts=data_artifacts, data_failures=data_failures)


def _baseline_group_labels(baseline: DistillReport, category: StepCategory) -> list[str] | None:
    labels: list[str] = []
    for slice_report in baseline.slices:
        for stats in slice_report.groups.get(category.value, []):
            if stats.label not in labels:
                labels.append(stats.label)
    return labels or None
