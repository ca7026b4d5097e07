"""Exception hierarchy shared across the package."""

from __future__ import annotations


class QueryflowError(Exception):
    """Base class for every error raised by this package."""


class MalformedOutput(QueryflowError):
    """Model output does not follow the mandated workflow text format."""


class GatewayTimeout(QueryflowError):
    """A backend call timed out after all retries."""


class ProviderError(QueryflowError):
    """The live provider answered with an error status."""

    def __init__(self, status: int, body: str):
        super().__init__(f"provider returned status {status}: {body[:500]}")
        self.status = status
        self.body = body


class ScriptMiss(QueryflowError):
    """The scripted backend has no entry for a request (a test-authoring error)."""


class EmptyInput(QueryflowError):
    """An embedding call received no texts, or an empty text."""


class DimensionMismatch(QueryflowError):
    """Vectors of different dimensions were combined."""


class ZeroVector(QueryflowError):
    """Cosine similarity is undefined for a zero-norm vector."""


class EmptyMatrix(QueryflowError):
    """The assignment solver received an empty score matrix."""


class EmptyWorkflowError(QueryflowError):
    """Workflow similarity is undefined for an empty step list."""


class ValidationFailed(QueryflowError):
    """A record failed validation on its way into the store."""

    def __init__(self, violations):
        super().__init__("record rejected: " + "; ".join(str(v) for v in violations))
        self.violations = list(violations)


class StorageFailure(QueryflowError):
    """The store could not persist a record."""


class CorruptRecord(QueryflowError):
    """A store file line could not be decoded."""

    def __init__(self, line_number: int, reason: str):
        super().__init__(f"corrupt record at line {line_number}: {reason}")
        self.line_number = line_number


class MissingEmbedding(QueryflowError):
    """An index was requested over records lacking the needed embedding."""


class GroupTooLarge(QueryflowError):
    """An action group exceeds the per-prompt step budget; split it first."""


class QueryGenParseError(QueryflowError):
    """The query-generation response is missing a level or is short of queries."""


class SchemaViolation(QueryflowError):
    """A model response violated its output schema after one retry."""


class MappingIncomplete(QueryflowError):
    """API generation left steps unmapped or mapped to unknown functions."""


class EmptySchema(QueryflowError):
    """The imported graph schema is empty."""


class SchemaUnreachable(QueryflowError):
    """The schema source could not be read."""


class NoCodeBlock(QueryflowError):
    """The data-agent response contained no fenced code block after one retry."""


class InvalidState(QueryflowError):
    """A run decision was applied in a state that does not accept it."""


class AccretionFailed(QueryflowError):
    """Seed-example accretion aborted; carries the records completed so far."""

    def __init__(self, message: str, completed):
        super().__init__(message)
        self.completed = list(completed)
