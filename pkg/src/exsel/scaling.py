"""Semantic distance, length difference, and min-max scaling primitives.

The length-difference table deliberately never materializes the pairwise
matrix: because the smallest pairwise difference is always 0 (a record vs
itself) and the largest is the pool's length range, the min-max-scaled
entry for any pair is |len_i - len_j| / (max - min). Storing the n lengths
plus that range reproduces the full scaled matrix exactly in O(n) space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .instrument import counters
from .pool import ExemplarRecord, Pool, QueryInstance

__all__ = [
    "cosine_similarity",
    "semantic_distance",
    "length_diff",
    "minmax_scale",
    "raw_query_distances",
    "query_distances",
    "ScaledQueryDistances",
    "LengthDiffTable",
    "scaled_length_diff",
]


def _as_vector(x) -> np.ndarray:
    if isinstance(x, QueryInstance):
        x = x.embedding
    return np.asarray(x, dtype=np.float64)


def cosine_similarity(a, b) -> float:
    """dot(a, b) / (|a| |b|), clamped into [-1, 1] against rounding."""
    a = _as_vector(a)
    b = _as_vector(b)
    if a.shape != b.shape:
        raise InputError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_sq_a = float(np.dot(a, a))
    norm_sq_b = float(np.dot(b, b))
    if norm_sq_a == 0.0 or norm_sq_b == 0.0:
        raise InputError("cosine similarity is undefined for a zero vector")
    value = float(np.dot(a, b)) / math.sqrt(norm_sq_a * norm_sq_b)
    return min(1.0, max(-1.0, value))


def semantic_distance(a, b) -> float:
    """Cosine distance: 1 - cosine_similarity, in [0, 2]."""
    return 1.0 - cosine_similarity(a, b)


def length_diff(a: ExemplarRecord, b: ExemplarRecord, mode: str) -> float:
    """Absolute difference of the two records' mode-values."""
    return abs(a.length_value(mode) - b.length_value(mode))


def minmax_scale(values) -> np.ndarray:
    """Map values affinely onto [0, 1]; a constant input maps to all zeros."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise InputError("cannot min-max scale an empty vector")
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


@dataclass(frozen=True)
class ScaledQueryDistances:
    """Per-record query distances after min-max scaling; each value in [0, 1]."""

    values: np.ndarray

    def __len__(self) -> int:
        return len(self.values)


def _require_embeddings(pool: Pool) -> np.ndarray:
    if pool.embeddings is None:
        raise InputError("pool has no embeddings attached")
    return pool.embeddings


def raw_query_distances(pool: Pool, query) -> np.ndarray:
    """Cosine distance from the query to every record, one matvec pass."""
    matrix = _require_embeddings(pool).astype(np.float64)
    q = _as_vector(query)
    if q.shape != (matrix.shape[1],):
        raise InputError(
            f"query dimension {q.shape} does not match pool dimension ({matrix.shape[1]},)"
        )
    q_norm_sq = float(np.dot(q, q))
    if q_norm_sq == 0.0:
        raise InputError("cosine similarity is undefined for a zero vector")
    row_norms_sq = np.einsum("ij,ij->i", matrix, matrix)
    if np.any(row_norms_sq == 0.0):
        raise InputError("pool contains a zero embedding vector")
    sims = (matrix @ q) / np.sqrt(row_norms_sq * q_norm_sq)
    np.clip(sims, -1.0, 1.0, out=sims)
    counters.add_query(len(sims))
    return 1.0 - sims


def query_distances(pool: Pool, query) -> ScaledQueryDistances:
    """Distances of one query against the whole pool, min-max scaled per query."""
    return ScaledQueryDistances(values=minmax_scale(raw_query_distances(pool, query)))


@dataclass(frozen=True)
class LengthDiffTable:
    """Lazy form of the pairwise length-difference matrix.

    Holds the n mode-values and the pool-wide (min, max); scaled entries are
    computed on demand. No pairwise storage, ever.
    """

    lengths: np.ndarray
    lo: float
    hi: float
    mode: str

    @classmethod
    def from_pool(cls, pool: Pool, mode: str) -> "LengthDiffTable":
        lengths = pool.length_values(mode)
        if lengths.size == 0:
            raise InputError("cannot build a length table for an empty pool")
        lo, hi = pool.length_range(mode)
        counters.add_length_reads(len(lengths))
        lengths = lengths.copy()
        lengths.setflags(write=False)
        return cls(lengths=lengths, lo=float(lo), hi=float(hi), mode=mode)

    @property
    def score_count(self) -> int:
        """Pool-preparation scoring count: one length read per record."""
        return len(self.lengths)

    @property
    def nbytes(self) -> int:
        return self.lengths.nbytes

    def scaled(self, i: int, j: int) -> float:
        """Scaled |len_i - len_j|; 0 when the pool range is degenerate."""
        span = self.hi - self.lo
        if span == 0.0:
            return 0.0
        return abs(float(self.lengths[i]) - float(self.lengths[j])) / span

    def scaled_diffs_to(self, j: int) -> np.ndarray:
        """Vector of scaled differences between record j and every record."""
        span = self.hi - self.lo
        if span == 0.0:
            return np.zeros_like(self.lengths)
        return np.abs(self.lengths - self.lengths[j]) / span


def scaled_length_diff(table: LengthDiffTable, i: int, j: int) -> float:
    """Min-max-scaled pairwise length difference, from the lazy table."""
    return table.scaled(i, j)
