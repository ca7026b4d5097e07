from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from queryflow.errors import (
    DimensionMismatch,
    EmptyMatrix,
    EmptyWorkflowError,
    ZeroVector,
)
from queryflow.gateway import hashed_unit_vector
from queryflow.model import EmbeddingVector
from queryflow.similarity import cosine, optimal_assignment, top_k, workflow_similarity


def vec(*values: float) -> EmbeddingVector:
    return EmbeddingVector.of(values)


def brute_force_max(matrix: list[list[float]]) -> float:
    """Exhaustive maximum over all injective matchings of size min(rows, cols)."""
    rows = len(matrix)
    cols = len(matrix[0])
    if rows <= cols:
        candidates = itertools.permutations(range(cols), rows)
        return max(sum(matrix[i][p[i]] for i in range(rows)) for p in candidates)
    candidates = itertools.permutations(range(rows), cols)
    return max(sum(matrix[p[j]][j] for j in range(cols)) for p in candidates)


class TestCosine:
    def test_self_similarity_is_exactly_one(self):
        e = vec(0.3, -1.2, 0.8)
        assert cosine(e, e) == 1.0

    def test_orthogonal_is_zero(self):
        assert cosine(vec(1, 0), vec(0, 1)) == 0.0

    def test_analytic_45_degrees(self):
        s = math.sqrt(2) / 2
        assert cosine(vec(1, 0), vec(s, s)) == pytest.approx(s, abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cosine(vec(1, 0), vec(1, 0, 0))

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            cosine(vec(0, 0), vec(1, 0))


class TestOptimalAssignment:
    def test_single_cell(self):
        result = optimal_assignment([[1.0]])
        assert result.pairs == ((0, 0),)
        assert result.total_score == 1.0

    def test_dominant_diagonal(self):
        matrix = [[0.9 if i == j else 0.1 for j in range(3)] for i in range(3)]
        result = optimal_assignment(matrix)
        assert set(result.pairs) == {(0, 0), (1, 1), (2, 2)}
        assert result.total_score == pytest.approx(2.7, abs=1e-12)

    def test_empty_matrix(self):
        with pytest.raises(EmptyMatrix):
            optimal_assignment([])

    def test_rectangular_matches_min_side(self):
        result = optimal_assignment([[0.2, 0.9, 0.1]])
        assert result.pairs == ((0, 1),)

    def test_random_5x5_against_exhaustive_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            matrix = rng.random((5, 5)).tolist()
            result = optimal_assignment(matrix)
            assert result.total_score == pytest.approx(brute_force_max(matrix), abs=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(
        rows=st.integers(1, 7),
        cols=st.integers(1, 7),
        seed=st.integers(0, 2**31),
    )
    def test_property_matches_oracle_up_to_7x7(self, rows, cols, seed):
        matrix = np.random.default_rng(seed).random((rows, cols)).tolist()
        result = optimal_assignment(matrix)
        assert result.total_score == pytest.approx(brute_force_max(matrix), abs=1e-9)
        assert len(result.pairs) == min(rows, cols)
        assert len({r for r, _ in result.pairs}) == len(result.pairs)
        assert len({c for _, c in result.pairs}) == len(result.pairs)


def _embeddings_for_matrix(matrix: list[list[float]]):
    """Unit vectors whose pairwise cosines equal the given 2x3 matrix."""
    u = [vec(1, 0, 0, 0, 0), vec(0, 1, 0, 0, 0)]
    v = []
    for j in range(3):
        a = matrix[0][j]
        b = matrix[1][j]
        rest = math.sqrt(1.0 - a * a - b * b)
        coords = [a, b, 0.0, 0.0, 0.0]
        coords[2 + j] = rest
        v.append(vec(*coords))
    return u, v


class TestWorkflowSimilarity:
    def test_identical_step_embeddings_score_one(self):
        steps = [EmbeddingVector.of(hashed_unit_vector(f"step {i}", 64)) for i in range(4)]
        assert workflow_similarity(steps, list(steps)) == 1.0

    def test_worked_2x3_example(self):
        matrix = [[0.9, 0.1, 0.2], [0.2, 0.8, 0.3]]
        a, b = _embeddings_for_matrix(matrix)
        score = workflow_similarity(a, b)
        assert score == pytest.approx(0.566667, abs=1e-6)

    def test_worked_example_matches_enumeration_oracle(self):
        matrix = [[0.9, 0.1, 0.2], [0.2, 0.8, 0.3]]
        best = max(
            matrix[0][p[0]] + matrix[1][p[1]]
            for p in itertools.permutations(range(3), 2)
        )
        assert best / 3 == pytest.approx(0.566667, abs=1e-6)

    def test_empty_side_rejected(self):
        with pytest.raises(EmptyWorkflowError):
            workflow_similarity([], [vec(1, 0)])

    def test_negative_cosines_clamped(self):
        score = workflow_similarity([vec(1, 0)], [vec(-1, 0)])
        assert score == 0.0

    @settings(max_examples=60, deadline=None)
    @given(
        n_a=st.integers(1, 6),
        n_b=st.integers(1, 6),
        seed=st.integers(0, 2**31),
    )
    def test_symmetry_and_range(self, n_a, n_b, seed):
        rng = np.random.default_rng(seed)
        a = [EmbeddingVector.of(v / np.linalg.norm(v)) for v in rng.standard_normal((n_a, 8))]
        b = [EmbeddingVector.of(v / np.linalg.norm(v)) for v in rng.standard_normal((n_b, 8))]
        forward = workflow_similarity(a, b)
        backward = workflow_similarity(b, a)
        assert abs(forward - backward) < 1e-12
        assert 0.0 <= forward <= 1.0


class TestTopK:
    def test_fewer_entries_than_k_returns_all(self):
        index = [(1, vec(1, 0)), (2, vec(0, 1))]
        assert top_k(vec(1, 0), index, k=4) == [1, 2]

    def test_tie_breaks_by_insertion_order(self):
        index = [(7, vec(1, 0)), (3, vec(1, 0))]
        assert top_k(vec(1, 0), index, k=1) == [7]

    def test_descending_cosine_order(self):
        index = [(1, vec(0, 1)), (2, vec(1, 0)), (3, vec(1, 1))]
        assert top_k(vec(1, 0), index, k=3) == [2, 3, 1]

    def test_output_is_prefix_of_full_ranking(self):
        rng = np.random.default_rng(3)
        index = [
            (i, EmbeddingVector.of(v / np.linalg.norm(v)))
            for i, v in enumerate(rng.standard_normal((10, 6)))
        ]
        probe = EmbeddingVector.of(rng.standard_normal(6))
        full = top_k(probe, index, k=10)
        assert top_k(probe, index, k=4) == full[:4]

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            top_k(vec(1, 0, 0), [(1, vec(1, 0))], k=1)

    def test_default_k_is_four(self):
        index = [(i, vec(1, 0)) for i in range(10)]
        assert len(top_k(vec(1, 0), index)) == 4
