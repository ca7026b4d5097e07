"""Single entry point for chat-completion and embedding calls.

Two backends: a live HTTP backend speaking the de-facto hosted-model JSON
protocol, and a fully deterministic scripted backend for offline runs and
tests. All calls go through :class:`Gateway`, which owns retries and call
metrics.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Mapping, Protocol, Sequence

import httpx
import numpy as np

from .errors import EmptyInput, GatewayTimeout, ProviderError, ScriptMiss
from .model import DEFAULT_EMBEDDING_DIM, EmbeddingVector


class ModelRole(Enum):
    """The configured model roles; each maps to one model identifier."""

    GENERATOR = "generator"
    REASONER = "reasoner"
    CODER = "coder"
    EMBEDDER = "embedder"


DEFAULT_MODEL_IDS: dict[ModelRole, str] = {
    ModelRole.GENERATOR: "gpt-4o",
    ModelRole.REASONER: "o3-mini",
    ModelRole.CODER: "o3-mini-high",
    ModelRole.EMBEDDER: "text-embedding-3-small",
}

_SPEAKERS = ("system", "user", "assistant")


@dataclass(frozen=True, slots=True)
class ChatMessage:
    speaker: str
    text: str

    def __post_init__(self) -> None:
        if self.speaker not in _SPEAKERS:
            raise ValueError(f"speaker must be one of {_SPEAKERS}, got {self.speaker!r}")


@dataclass(frozen=True)
class ChatRequest:
    role: ModelRole
    messages: tuple[ChatMessage, ...]
    sampling_params: Mapping[str, Any] = field(default_factory=dict)
    timeout_s: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        if self.role is ModelRole.EMBEDDER:
            raise ValueError("the embedder role does not accept chat requests")

    def user_text(self) -> str:
        """Concatenated text of all user messages (handy for inspection)."""
        return "\n".join(m.text for m in self.messages if m.speaker == "user")


def fingerprint(request: ChatRequest) -> str:
    """Stable digest of (role, message texts); ignores sampling params."""
    digest = hashlib.sha256()
    digest.update(request.role.value.encode("utf-8"))
    for message in request.messages:
        digest.update(b"\x00")
        digest.update(message.text.encode("utf-8"))
    return digest.hexdigest()


def hashed_unit_vector(text: str, dim: int) -> list[float]:
    """Deterministic pseudo-random unit vector seeded by the text content.

    Equal texts get equal vectors; distinct texts are near-orthogonal in
    expectation at realistic dimensions.
    """
    seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
    rng = np.random.default_rng(seed)
    vector = rng.standard_normal(dim)
    vector /= np.linalg.norm(vector)
    return [float(v) for v in vector]


class Backend(Protocol):
    def complete(self, request: ChatRequest) -> str: ...

    def embed_texts(self, texts: Sequence[str], dim: int) -> list[list[float]]: ...


class ScriptedBackend:
    """Deterministic offline backend.

    Responses resolve in order: exact fingerprint table, then per-role
    response sequences (for loop tests that need a different answer per
    call), then an optional pure responder function. Anything unresolved
    raises ScriptMiss. Embeddings are hash-derived unit vectors unless an
    exact-text override is registered.
    """

    def __init__(
        self,
        script: Mapping[str, str] | None = None,
        responder: Callable[[ChatRequest], str | None] | None = None,
        role_sequences: Mapping[ModelRole, Sequence[str]] | None = None,
        embedding_overrides: Mapping[str, Sequence[float]] | None = None,
    ):
        self.script: dict[str, str] = dict(script or {})
        self.responder = responder
        self.role_sequences: dict[ModelRole, list[str]] = {
            role: list(seq) for role, seq in (role_sequences or {}).items()
        }
        self.embedding_overrides: dict[str, list[float]] = {
            text: [float(v) for v in vec]
            for text, vec in (embedding_overrides or {}).items()
        }
        self.requests: list[ChatRequest] = []

    def add(self, request: ChatRequest, response: str) -> None:
        self.script[fingerprint(request)] = response

    def complete(self, request: ChatRequest) -> str:
        self.requests.append(request)
        key = fingerprint(request)
        if key in self.script:
            return self.script[key]
        sequence = self.role_sequences.get(request.role)
        if sequence:
            return sequence.pop(0)
        if self.responder is not None:
            response = self.responder(request)
            if response is not None:
                return response
        raise ScriptMiss(f"no scripted response for {request.role.value} request {key[:12]}")

    def embed_texts(self, texts: Sequence[str], dim: int) -> list[list[float]]:
        return [
            self.embedding_overrides.get(text) or hashed_unit_vector(text, dim)
            for text in texts
        ]


class LiveBackend:
    """HTTP backend: POST /chat/completions and POST /embeddings."""

    def __init__(
        self,
        base_url: str,
        api_key: str,
        model_ids: Mapping[ModelRole, str] | None = None,
        timeout_s: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model_ids = dict(DEFAULT_MODEL_IDS)
        self.model_ids.update(model_ids or {})
        self._client = httpx.Client(
            headers={"Authorization": f"Bearer {api_key}"},
            timeout=timeout_s,
            transport=transport,
        )

    def _post(self, path: str, payload: dict, timeout: float | None) -> dict:
        try:
            response = self._client.post(
                f"{self.base_url}{path}", json=payload, timeout=timeout
            )
        except httpx.TimeoutException as exc:
            raise GatewayTimeout(f"{path} timed out: {exc}") from exc
        except httpx.HTTPError as exc:
            raise ProviderError(0, str(exc)) from exc
        if response.status_code >= 400:
            raise ProviderError(response.status_code, response.text)
        return response.json()

    def complete(self, request: ChatRequest) -> str:
        payload = {
            "model": self.model_ids[request.role],
            "messages": [
                {"role": m.speaker, "content": m.text} for m in request.messages
            ],
        }
        payload.update(request.sampling_params)
        data = self._post("/chat/completions", payload, request.timeout_s)
        return data["choices"][0]["message"]["content"]

    def embed_texts(self, texts: Sequence[str], dim: int) -> list[list[float]]:
        payload = {"model": self.model_ids[ModelRole.EMBEDDER], "input": list(texts)}
        data = self._post("/embeddings", payload, None)
        vectors = [item["embedding"] for item in data["data"]]
        for vector in vectors:
            if len(vector) != dim:
                raise ProviderError(
                    0, f"provider returned {len(vector)}-dim embedding, expected {dim}"
                )
        return vectors


@dataclass
class GatewayMetrics:
    chat_calls: dict[str, int] = field(default_factory=dict)
    embed_calls: int = 0
    embed_texts: int = 0
    retries: int = 0

    def chat_calls_for(self, role: ModelRole) -> int:
        return self.chat_calls.get(role.value, 0)

    @property
    def total_chat_calls(self) -> int:
        return sum(self.chat_calls.values())


class Gateway:
    """Shared front door for all model calls.

    Requests exactly one completion per call and returns its text verbatim;
    timeouts retry with exponential backoff, other failures surface as-is.
    """

    def __init__(
        self,
        backend: Backend,
        embedding_dim: int = DEFAULT_EMBEDDING_DIM,
        max_retries: int = 3,
        backoff_base_s: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.backend = backend
        self.embedding_dim = embedding_dim
        self.max_retries = max_retries
        self.backoff_base_s = backoff_base_s
        self._sleep = sleep
        self.metrics = GatewayMetrics()

    def _with_retries(self, call: Callable[[], Any]) -> Any:
        attempt = 0
        while True:
            try:
                return call()
            except GatewayTimeout:
                if attempt >= self.max_retries:
                    raise
                self._sleep(self.backoff_base_s * (2**attempt))
                attempt += 1
                self.metrics.retries += 1

    def chat(self, request: ChatRequest) -> str:
        self.metrics.chat_calls[request.role.value] = (
            self.metrics.chat_calls.get(request.role.value, 0) + 1
        )
        return self._with_retries(lambda: self.backend.complete(request))

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        if not texts:
            raise EmptyInput("embed() needs at least one text")
        for text in texts:
            if not text:
                raise EmptyInput("embed() texts must be non-empty")
        self.metrics.embed_calls += 1
        self.metrics.embed_texts += len(texts)
        vectors = self._with_retries(
            lambda: self.backend.embed_texts(list(texts), self.embedding_dim)
        )
        return [EmbeddingVector.of(v) for v in vectors]

    def embed_one(self, text: str) -> EmbeddingVector:
        return self.embed([text])[0]
