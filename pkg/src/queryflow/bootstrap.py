"""Builds the initial corpus: leveled query generation, incremental ICL
accretion, and the batch seeding of the first records.

Accretion grows the workflow prompt one accepted example at a time, each
example generated by the model itself under the examples collected so far.
Seeding then applies the full four-example prompt to every reviewed query
in a single pass (no retrieval loop; this stage predates the agent).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import AccretionFailed, QueryflowError, QueryGenParseError
from .gateway import Gateway
from .model import (
    ComplexityLevel,
    Query,
    QueryOrigin,
    QueryWorkflowRecord,
    ScopeDescription,
    now_rfc3339,
    parse_workflow,
)
from .prompts import DEFAULT_ICL_CAPACITY, PromptSuite, default_suite
from .store import ExampleStore

_QUERY_LINE = re.compile(
    r"^(SIMPLE|MODERATE|COMPLEX_SINGLE_GOAL|MULTI_GOAL)\s*:\s*(.+)$"
)

_LEVEL_BY_TAG = {
    "SIMPLE": ComplexityLevel.SIMPLE,
    "MODERATE": ComplexityLevel.MODERATE,
    "COMPLEX_SINGLE_GOAL": ComplexityLevel.COMPLEX_SINGLE_GOAL,
    "MULTI_GOAL": ComplexityLevel.MULTI_GOAL,
}


@dataclass(frozen=True, slots=True)
class BootstrapPlan:
    """How many queries to generate and which become accretion seeds."""

    per_level: int = 20
    seed_icl_levels: tuple[tuple[ComplexityLevel, int], ...] = (
        (ComplexityLevel.SIMPLE, 2),
        (ComplexityLevel.MODERATE, 2),
    )
    batch_levels: tuple[ComplexityLevel, ...] = (
        ComplexityLevel.SIMPLE,
        ComplexityLevel.MODERATE,
    )

    def __post_init__(self) -> None:
        seed_total = sum(count for _, count in self.seed_icl_levels)
        if seed_total != DEFAULT_ICL_CAPACITY:
            raise ValueError(
                f"seed counts must sum to the ICL capacity ({DEFAULT_ICL_CAPACITY}), got {seed_total}"
            )


def parse_query_list(
    raw_text: str, per_level: int, id_start: int = 1
) -> list[Query]:
    """Parse level-tagged query lines into per_level queries per level.

    Lines that do not match the ``LEVEL: text`` shape are ignored; a level
    with fewer than per_level queries is an error, extras are dropped.
    """
    by_level: dict[ComplexityLevel, list[str]] = {level: [] for level in ComplexityLevel}
    for line in raw_text.splitlines():
        match = _QUERY_LINE.match(line.strip())
        if match:
            by_level[_LEVEL_BY_TAG[match.group(1)]].append(match.group(2).strip())
    short = {
        level.name: len(texts)
        for level, texts in by_level.items()
        if len(texts) < per_level
    }
    if short:
        raise QueryGenParseError(
            f"expected {per_level} queries per level; short levels: {short}"
        )
    queries: list[Query] = []
    counter = id_start
    for level in ComplexityLevel:
        for text in by_level[level][:per_level]:
            queries.append(
                Query(
                    id=f"q{counter:03d}",
                    text=text,
                    level=level,
                    origin=QueryOrigin.GENERATED,
                )
            )
            counter += 1
    return queries


def generate_queries(
    scope: ScopeDescription,
    per_level: int,
    gateway: Gateway,
    suite: PromptSuite | None = None,
    icl: Sequence[Query] = (),
    id_start: int = 1,
) -> list[Query]:
    """Ask the generator model for per_level queries at each level."""
    suite = suite or default_suite()
    request = suite.build_query_gen_prompt(scope, icl=icl, per_level=per_level)
    response = gateway.chat(request)
    return parse_query_list(response, per_level, id_start=id_start)


def write_query_review_file(queries: Sequence[Query], path: str | Path) -> None:
    """Emit queries for operator confirm/strike before seeding."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for query in queries:
            handle.write(
                json.dumps(
                    {
                        "id": query.id,
                        "text": query.text,
                        "level": query.level.value,
                        "origin": query.origin.value,
                        "accepted": True,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_query_review_file(path: str | Path) -> list[tuple[Query, bool]]:
    entries: list[tuple[Query, bool]] = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            data = json.loads(line)
            query = Query(
                id=data["id"],
                text=data["text"],
                level=ComplexityLevel.from_value(data["level"]),
                origin=QueryOrigin(data["origin"]),
            )
            entries.append((query, bool(data.get("accepted", True))))
    return entries


def accrete_icl(
    seed_queries: Sequence[Query],
    scope: ScopeDescription,
    gateway: Gateway,
    suite: PromptSuite | None = None,
) -> list[QueryWorkflowRecord]:
    """Grow the in-context example set one model-generated record at a time.

    Call i sees exactly the i-1 records accepted so far; responses are
    taken verbatim. Returns the records in accretion order. A model or
    parse failure aborts, reporting the records completed before it.
    """
    if len(seed_queries) != DEFAULT_ICL_CAPACITY:
        raise ValueError(f"accretion needs exactly {DEFAULT_ICL_CAPACITY} seed queries")
    suite = suite or default_suite()
    records: list[QueryWorkflowRecord] = []
    for query in seed_queries:
        request = suite.build_workflow_prompt(scope, records, query, with_thought=True)
        try:
            raw = gateway.chat(request)
            thought, workflow = parse_workflow(raw)
        except QueryflowError as exc:
            raise AccretionFailed(
                f"accretion failed on query {query.id}: {exc}", records
            ) from exc
        records.append(
            QueryWorkflowRecord(
                query=query,
                thought=thought,
                workflow=workflow,
                created_at=now_rfc3339(),
                accepted=True,
            )
        )
    return records


@dataclass(slots=True)
class SeedReport:
    stored: int
    failures: list[tuple[str, str]]  # (query id, error)


def seed_database(
    queries: Sequence[Query],
    icl_records: Sequence[QueryWorkflowRecord],
    store: ExampleStore,
    gateway: Gateway,
    scope: ScopeDescription,
    suite: PromptSuite | None = None,
) -> SeedReport:
    """Generate and store one record per query using the fixed ICL set.

    Queries that were themselves accretion seeds reuse their accretion-time
    records rather than being regenerated. Per-query failures are collected;
    the successful records are still stored.
    """
    suite = suite or default_suite()
    by_seed_id = {record.query.id: record for record in icl_records}
    report = SeedReport(stored=0, failures=[])
    for query in queries:
        try:
            record = by_seed_id.get(query.id)
            if record is None:
                request = suite.build_workflow_prompt(
                    scope, icl_records, query, with_thought=True
                )
                raw = gateway.chat(request)
                thought, workflow = parse_workflow(raw)
                record = QueryWorkflowRecord(
                    query=query,
                    thought=thought,
                    workflow=workflow,
                    created_at=now_rfc3339(),
                    accepted=True,
                )
            store.append(record)
            report.stored += 1
        except QueryflowError as exc:
            report.failures.append((query.id, str(exc)))
    return report
