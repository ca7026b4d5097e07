"""Deterministic similarity mathematics.

Cosine kernel, optimal step assignment, workflow-to-workflow similarity,
and top-k nearest-record retrieval. Pure functions throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionMismatch, EmptyMatrix, EmptyWorkflowError, ZeroVector
from .model import EmbeddingVector

DEFAULT_TOP_K = 4


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """Cosine similarity in [-1, 1]; exactly 1.0 for identical vectors."""
    if u.dim != v.dim:
        raise DimensionMismatch(f"cosine over dims {u.dim} and {v.dim}")
    a = u.as_array()
    b = v.as_array()
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine is undefined for a zero vector")
    if u.values == v.values:
        return 1.0
    return float(np.clip(float(a @ b) / (norm_a * norm_b), -1.0, 1.0))


@dataclass(frozen=True, slots=True)
class Assignment:
    """An injective row-to-column matching maximizing the summed scores."""

    pairs: tuple[tuple[int, int], ...]
    total_score: float


def optimal_assignment(score_matrix: Sequence[Sequence[float]]) -> Assignment:
    """Maximum-score injective matching of size min(rows, cols)."""
    matrix = np.asarray(score_matrix, dtype=np.float64)
    if matrix.size == 0:
        raise EmptyMatrix("assignment over an empty matrix")
    if matrix.ndim != 2:
        raise EmptyMatrix(f"expected a 2-d matrix, got shape {matrix.shape}")
    if not np.isfinite(matrix).all():
        raise ValueError("score matrix contains non-finite entries")
    rows, cols = linear_sum_assignment(matrix, maximize=True)
    pairs = tuple((int(r), int(c)) for r, c in zip(rows, cols))
    return Assignment(pairs=pairs, total_score=float(matrix[rows, cols].sum()))


def workflow_similarity(
    a_steps: Sequence[EmbeddingVector], b_steps: Sequence[EmbeddingVector]
) -> float:
    """Semantic similarity between two workflows, in [0, 1].

    Steps are matched by optimal assignment over the pairwise clamped
    cosine matrix (negatives clamped to 0); unmatched steps score 0, so
    the matched total is averaged over max(len(a), len(b)). Symmetric.
    """
    if not a_steps or not b_steps:
        raise EmptyWorkflowError("workflow similarity needs non-empty step lists")
    matrix = [
        [max(cosine(a, b), 0.0) for b in b_steps]
        for a in a_steps
    ]
    assignment = optimal_assignment(matrix)
    return assignment.total_score / max(len(a_steps), len(b_steps))


def top_k(
    probe: EmbeddingVector,
    index: Sequence[tuple[int, EmbeddingVector]],
    k: int = DEFAULT_TOP_K,
) -> list[int]:
    """Ids of the k nearest entries by cosine, descending.

    Ties break toward earlier insertion order; fewer than k entries are
    all returned, ordered.
    """
    if k < 1:
        raise ValueError("k must be positive")
    scored = []
    for position, (record_id, vector) in enumerate(index):
        scored.append((-cosine(probe, vector), position, record_id))
    scored.sort()
    return [record_id for _, _, record_id in scored[:k]]
