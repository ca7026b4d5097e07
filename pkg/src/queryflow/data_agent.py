"""Data-category steps: database query code generated from a graph schema.

Generated code is never executed here; artifacts land in a manifest for
operator review, with the bindings recorded so regenerated runs diff
cleanly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import EmptySchema, NoCodeBlock, QueryflowError, SchemaUnreachable
from .gateway import Gateway
from .model import WorkflowStep
from .prompts import PromptSuite, default_suite

_FENCED_BLOCK = re.compile(r"```([\w-]*)\n(.*?)```", re.DOTALL)


@dataclass(frozen=True, slots=True)
class GraphSchema:
    """Flat textual schema: node labels, relationship types, properties."""

    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise EmptySchema("graph schema text is empty")


def import_schema(descriptor: str | Path) -> GraphSchema:
    """Read a schema from an exported schema file.

    Connection-style descriptors (anything with a ``://`` scheme) require a
    reachable database, which offline runs do not have; export the schema
    to a file instead.
    """
    text = str(descriptor)
    if "://" in text:
        raise SchemaUnreachable(
            f"cannot introspect {text!r} offline; export the schema to a file and pass its path"
        )
    path = Path(descriptor)
    try:
        content = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaUnreachable(f"cannot read schema file {path}: {exc}") from exc
    return GraphSchema(content)


@dataclass(frozen=True, slots=True)
class DataCodeArtifact:
    query_id: str
    step_index: int
    language_tag: str
    code: str
    bindings: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if not self.code.strip():
            raise ValueError("artifact code must be non-empty")

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "step_index": self.step_index,
            "language_tag": self.language_tag,
            "code": self.code,
            "bindings": {k: v for k, v in self.bindings},
        }


def generate_data_code(
    step: WorkflowStep,
    schema: GraphSchema,
    bindings: Mapping[str, str],
    gateway: Gateway,
    provenance: tuple[str, int],
    suite: PromptSuite | None = None,
) -> DataCodeArtifact:
    """Ask the model for executable query code; returns the fenced block.

    One retry on a response without a fenced code block, then NoCodeBlock.
    """
    suite = suite or default_suite()
    request = suite.build_data_agent_prompt(schema.text, step, bindings)
    last_error: QueryflowError | None = None
    for _ in range(2):
        try:
            response = gateway.chat(request)
            match = _FENCED_BLOCK.search(response)
            if match is None:
                raise NoCodeBlock(
                    f"no fenced code block for step {provenance[0]}#{provenance[1]}"
                )
            return DataCodeArtifact(
                query_id=provenance[0],
                step_index=provenance[1],
                language_tag=match.group(1) or "text",
                code=match.group(2).strip(),
                bindings=tuple(sorted((k, str(v)) for k, v in bindings.items())),
            )
        except QueryflowError as exc:
            last_error = exc
    assert last_error is not None
    raise last_error


def write_manifest(artifacts: Sequence[DataCodeArtifact], path: str | Path) -> None:
    """One artifact per line, under data_agent/manifest.jsonl by convention."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for artifact in artifacts:
            handle.write(json.dumps(artifact.to_dict(), ensure_ascii=False) + "\n")
