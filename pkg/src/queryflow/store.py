"""Append-only example store: the accumulative query-workflow database.

One JSON record per line (the canonical serialization from model.py).
Appends are crash-safe; re-embedding rewrites the file through an atomic
replace. Rejected workflows go to a separate audit file and never enter
the store.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import replace
from pathlib import Path
from typing import Literal

from .errors import (
    CorruptRecord,
    MissingEmbedding,
    StorageFailure,
    ValidationFailed,
)
from .gateway import Gateway
from .model import (
    DEFAULT_EMBEDDING_DIM,
    EmbeddingVector,
    QueryWorkflowRecord,
    Thought,
    Violation,
    Workflow,
    step_embedding_text,
    validate_record,
)

IndexField = Literal["query", "thought"]


class ExampleStore:
    """Durable ordered record log with embedding caches and retrieval indexes.

    Single-writer: every mutation serializes through one lock; readers see
    the in-memory snapshot, which always equals the on-disk order.
    """

    def __init__(
        self,
        path: str | Path,
        embedding_dim: int = DEFAULT_EMBEDDING_DIM,
    ):
        self.path = Path(path)
        self.rejected_path = self.path.with_name("rejected.jsonl")
        self.embedding_dim = embedding_dim
        self._records: list[QueryWorkflowRecord] = []
        self._lock = threading.Lock()

    @classmethod
    def load(
        cls, path: str | Path, embedding_dim: int = DEFAULT_EMBEDDING_DIM
    ) -> "ExampleStore":
        """Load a store file; a missing file yields an empty store."""
        store = cls(path, embedding_dim)
        if not store.path.exists():
            return store
        seen_ids: set[int] = set()
        with open(store.path, encoding="utf-8") as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    record = QueryWorkflowRecord.from_json(line)
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise CorruptRecord(line_number, str(exc)) from exc
                if record.id is None or record.id in seen_ids:
                    raise CorruptRecord(line_number, f"bad or duplicate record id {record.id}")
                seen_ids.add(record.id)
                store._records.append(record)
        return store

    def __len__(self) -> int:
        return len(self._records)

    def records(self) -> tuple[QueryWorkflowRecord, ...]:
        return tuple(self._records)

    def get(self, record_id: int) -> QueryWorkflowRecord | None:
        for record in self._records:
            if record.id == record_id:
                return record
        return None

    def append(self, record: QueryWorkflowRecord) -> int:
        """Validate, assign the next id, and durably append one record."""
        violations = validate_record(record, self.embedding_dim)
        if not record.accepted:
            violations.append(Violation("NotAccepted", "only accepted records enter the store"))
        if any(r.query.id == record.query.id for r in self._records):
            violations.append(
                Violation("DuplicateQueryId", f"query id {record.query.id!r} already stored")
            )
        if violations:
            raise ValidationFailed(violations)
        with self._lock:
            next_id = (self._records[-1].id + 1) if self._records else 1
            stored = replace(record, id=next_id)
            self._append_line(self.path, stored.to_json())
            self._records.append(stored)
            return next_id

    def log_rejection(self, record: QueryWorkflowRecord) -> None:
        """Audit a declined workflow; it never becomes an ICL candidate."""
        with self._lock:
            rejected = replace(record, accepted=False)
            self._append_line(self.rejected_path, rejected.to_json())

    @staticmethod
    def _append_line(path: Path, line: str) -> None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "a", encoding="utf-8") as handle:
                handle.write(line + "\n")
                handle.flush()
                os.fsync(handle.fileno())
        except OSError as exc:
            raise StorageFailure(f"could not append to {path}: {exc}") from exc

    def ensure_embeddings(self, gateway: Gateway) -> int:
        """Embed every missing query, thought, and step text; returns the count.

        Present caches are kept as-is, so unchanged texts are never
        re-embedded. Empty thoughts (thoughtless records) stay unembedded.
        """
        texts: list[str] = []
        slots: list[tuple[int, str, int]] = []  # (record position, kind, step offset)
        for position, record in enumerate(self._records):
            if record.query_embedding is None:
                texts.append(record.query.text)
                slots.append((position, "query", 0))
            if record.thought_embedding is None and record.thought.text:
                texts.append(record.thought.text)
                slots.append((position, "thought", 0))
            if record.step_embeddings is None:
                for offset, step in enumerate(record.workflow.steps):
                    texts.append(step_embedding_text(step))
                    slots.append((position, "step", offset))
        if not texts:
            return 0
        vectors = gateway.embed(texts)
        partial_steps: dict[int, dict[int, EmbeddingVector]] = {}
        with self._lock:
            for (position, kind, offset), vector in zip(slots, vectors):
                record = self._records[position]
                if kind == "query":
                    self._records[position] = replace(record, query_embedding=vector)
                elif kind == "thought":
                    self._records[position] = replace(record, thought_embedding=vector)
                else:
                    partial_steps.setdefault(position, {})[offset] = vector
            for position, by_offset in partial_steps.items():
                record = self._records[position]
                ordered = tuple(by_offset[i] for i in range(len(record.workflow.steps)))
                self._records[position] = replace(record, step_embeddings=ordered)
            self._rewrite()
        return len(texts)

    def build_index(self, field: IndexField) -> list[tuple[int, EmbeddingVector]]:
        """Insertion-ordered (record id, embedding) pairs over one field."""
        index: list[tuple[int, EmbeddingVector]] = []
        for record in self._records:
            vector = (
                record.query_embedding if field == "query" else record.thought_embedding
            )
            if vector is None:
                raise MissingEmbedding(
                    f"record {record.id} has no {field} embedding; run ensure_embeddings first"
                )
            assert record.id is not None
            index.append((record.id, vector))
        return index

    def update_record(
        self,
        record_id: int,
        *,
        thought: Thought | None = None,
        workflow: Workflow | None = None,
    ) -> QueryWorkflowRecord:
        """Replace a record's thought or workflow, dropping the stale caches."""
        with self._lock:
            for position, record in enumerate(self._records):
                if record.id == record_id:
                    updated = record
                    if thought is not None:
                        updated = replace(updated, thought=thought, thought_embedding=None)
                    if workflow is not None:
                        updated = replace(updated, workflow=workflow, step_embeddings=None)
                    self._records[position] = updated
                    self._rewrite()
                    return updated
        raise ValidationFailed([Violation("UnknownRecord", f"no record with id {record_id}")])

    def _rewrite(self) -> None:
        """Atomic whole-file replace from the in-memory snapshot."""
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            tmp_path = self.path.with_suffix(".tmp")
            with open(tmp_path, "w", encoding="utf-8") as handle:
                for record in self._records:
                    handle.write(record.to_json() + "\n")
                handle.flush()
                os.fsync(handle.fileno())
            os.replace(tmp_path, self.path)
        except OSError as exc:
            raise StorageFailure(f"could not rewrite {self.path}: {exc}") from exc
