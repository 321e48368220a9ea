"""Exemplar selection strategies.

Four strategies share one result shape:

* random -- uniform sample without replacement.
* nn     -- k nearest records by cosine distance to the query.
* mmr    -- greedy trade-off between query similarity and redundancy with the
  already-selected set, using unscaled cosine similarities. Requires the
  packed pairwise-similarity structure (n*(n-1)/2 entries, built at pool
  preparation time).
* dl_mmr -- greedy trade-off between min-max-scaled query distance and
  length diversity against the selected set. Needs only the n stored
  lengths; no record-record embedding comparison ever happens.

Greedy loops resolve score ties by the lower record id so selections are
deterministic and reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .instrument import counters
from .pool import LENGTH_MODES, Pool, QueryInstance
from .scaling import (
    LengthDiffTable,
    cosine_similarity,
    minmax_scale,
    raw_query_distances,
    semantic_distance,
)

STRATEGIES = ("random", "nn", "mmr", "dl_mmr")
DEFAULT_K = 8


def default_lambda(strategy: str, mode: str | None = None) -> float:
    """Relevance/diversity weight used when none is given explicitly.

    0.1 for dl_mmr on target-word or compression-ratio modes, 0.5 for
    dl_mmr on source words and for mmr; strategies without a diversity
    term get 0.
    """
    if strategy == "mmr":
        return 0.5
    if strategy == "dl_mmr":
        return 0.5 if mode == "src_words" else 0.1
    return 0.0


@dataclass(frozen=True)
class SelectionConfig:
    """Strategy plus its knobs; lam=None means the strategy/mode default."""

    strategy: str
    k: int = DEFAULT_K
    lam: float | None = None
    mode: str | None = None
    seed: int = 42
    candidate_limit: int | None = None

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise InputError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.k < 1:
            raise InputError(f"k must be >= 1, got {self.k}")
        if self.lam is not None and not 0.0 <= self.lam <= 1.0:
            raise InputError(f"lambda must be in [0, 1], got {self.lam}")
        if self.strategy == "dl_mmr":
            if self.mode is None:
                object.__setattr__(self, "mode", "tgt_words")
            elif self.mode not in LENGTH_MODES:
                raise InputError(f"unknown length mode {self.mode!r}; expected one of {LENGTH_MODES}")
        if self.candidate_limit is not None and self.candidate_limit < self.k:
            raise InputError(
                f"candidate_limit ({self.candidate_limit}) must be >= k ({self.k})"
            )

    def resolved_lambda(self) -> float:
        return self.lam if self.lam is not None else default_lambda(self.strategy, self.mode)


@dataclass(frozen=True)
class StepTrace:
    """One greedy step: the winner, its combined score, and the components."""

    chosen: int
    score: float
    relevance: float
    diversity: float


@dataclass(frozen=True)
class SelectionResult:
    """Ordered selection plus per-step traces.

    ``score_count`` is the number of query-side similarity evaluations this
    call performed (0 for random, n otherwise); pool-side preparation work is
    accounted on the preparation structures themselves
    (:class:`PairwiseSimilarities` and :class:`~exsel.scaling.LengthDiffTable`).
    """

    selected: tuple[int, ...]
    step_traces: tuple[StepTrace, ...]
    score_count: int


class PairwiseSimilarities:
    """Packed upper triangle of record-record cosine similarities.

    The structure MMR preparation pays for: n*(n-1)/2 float64 entries laid
    out row-major, pair (i, j) with i < j at index
    ``i*n - i*(i+1)/2 + (j - i - 1)``.
    """

    def __init__(self, packed: np.ndarray, n: int):
        self.packed = packed
        self.n = n

    @classmethod
    def build(cls, pool: Pool, block_rows: int = 1024) -> "PairwiseSimilarities":
        if pool.embeddings is None:
            raise InputError("pool has no embeddings attached")
        matrix = pool.embeddings.astype(np.float64)
        n = matrix.shape[0]
        norms_sq = np.einsum("ij,ij->i", matrix, matrix)
        if np.any(norms_sq == 0.0):
            raise InputError("pool contains a zero embedding vector")
        unit = matrix / np.sqrt(norms_sq)[:, None]
        packed = np.empty(n * (n - 1) // 2, dtype=np.float64)
        offset = 0
        for i0 in range(0, n, block_rows):
            i1 = min(i0 + block_rows, n)
            sims = unit[i0:i1] @ unit.T
            block_entries = 0
            for i in range(i0, i1):
                row = sims[i - i0, i + 1 :]
                packed[offset : offset + row.size] = row
                offset += row.size
                block_entries += row.size
            counters.add_pairwise(block_entries)
        np.clip(packed, -1.0, 1.0, out=packed)
        packed.setflags(write=False)
        return cls(packed, n)

    @property
    def score_count(self) -> int:
        """Pool-preparation scoring count: one evaluation per unordered pair."""
        return self.n * (self.n - 1) // 2

    @property
    def nbytes(self) -> int:
        return self.packed.nbytes

    def pair(self, i: int, j: int) -> float:
        if i == j:
            return 1.0
        if i > j:
            i, j = j, i
        return float(self.packed[i * self.n - i * (i + 1) // 2 + (j - i - 1)])

    def row(self, i: int) -> np.ndarray:
        """Similarities of record i against every record (1.0 at i itself)."""
        n = self.n
        out = np.empty(n, dtype=np.float64)
        out[i] = 1.0
        if i > 0:
            prev = np.arange(i, dtype=np.int64)
            out[:i] = self.packed[prev * n - prev * (prev + 1) // 2 + (i - prev - 1)]
        if i < n - 1:
            start = i * n - i * (i + 1) // 2
            out[i + 1 :] = self.packed[start : start + (n - 1 - i)]
        return out


def _check_k(pool: Pool, k: int) -> int:
    n = len(pool.records)
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if k > n:
        raise InputError(f"k ({k}) exceeds pool size ({n})")
    return n


def _check_lambda(lam: float) -> None:
    if not 0.0 <= lam <= 1.0:
        raise InputError(f"lambda must be in [0, 1], got {lam}")


def _blocked_ids(dists: np.ndarray, candidate_limit: int | None, k: int) -> np.ndarray:
    """Ids excluded by the optional relevance pre-filter (off by default)."""
    n = len(dists)
    if candidate_limit is None or candidate_limit >= n:
        return np.empty(0, dtype=np.int64)
    if candidate_limit < k:
        raise InputError(f"candidate_limit ({candidate_limit}) must be >= k ({k})")
    order = np.argsort(dists, kind="stable")
    return order[candidate_limit:]


def select_random(pool: Pool, k: int, seed: int) -> SelectionResult:
    """k distinct ids sampled uniformly without replacement."""
    n = _check_k(pool, k)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(n, size=k, replace=False)
    traces = tuple(StepTrace(chosen=int(j), score=0.0, relevance=0.0, diversity=0.0) for j in chosen)
    return SelectionResult(selected=tuple(int(j) for j in chosen), step_traces=traces, score_count=0)


def select_nn(pool: Pool, query, k: int, *, candidate_limit: int | None = None) -> SelectionResult:
    """The k records nearest to the query by cosine distance, ascending."""
    n = _check_k(pool, k)
    dists = raw_query_distances(pool, query)
    if candidate_limit is not None and candidate_limit < k:
        raise InputError(f"candidate_limit ({candidate_limit}) must be >= k ({k})")
    order = np.argsort(dists, kind="stable")[:k]
    traces = tuple(
        StepTrace(chosen=int(j), score=float(dists[j]), relevance=float(dists[j]), diversity=0.0)
        for j in order
    )
    return SelectionResult(selected=tuple(int(j) for j in order), step_traces=traces, score_count=n)


def select_mmr(
    pool: Pool,
    query,
    k: int,
    lam: float,
    *,
    pairwise: PairwiseSimilarities | None = None,
    candidate_limit: int | None = None,
) -> SelectionResult:
    """Greedy argmax of (1-lam)*sim(query, j) - lam*max_{i in T} sim(j, i).

    Similarities are unscaled cosines; the first step has no diversity term.
    """
    n = _check_k(pool, k)
    _check_lambda(lam)
    if pairwise is None:
        pairwise = PairwiseSimilarities.build(pool)
    if pairwise.n != n:
        raise InputError(f"pairwise structure built for n={pairwise.n}, pool has n={n}")
    dists = raw_query_distances(pool, query)
    sims = 1.0 - dists
    blocked = _blocked_ids(dists, candidate_limit, k)

    selected: list[int] = []
    traces: list[StepTrace] = []
    max_sim: np.ndarray | None = None
    zeros = np.zeros(n, dtype=np.float64)
    for _ in range(k):
        diversity = zeros if max_sim is None else max_sim
        scores = (1.0 - lam) * sims - lam * diversity
        if blocked.size:
            scores[blocked] = -np.inf
        if selected:
            scores[selected] = -np.inf
        j = int(np.argmax(scores))
        traces.append(
            StepTrace(chosen=j, score=float(scores[j]), relevance=float(sims[j]), diversity=float(diversity[j]))
        )
        selected.append(j)
        row = pairwise.row(j)
        max_sim = row if max_sim is None else np.maximum(max_sim, row)
    return SelectionResult(selected=tuple(selected), step_traces=tuple(traces), score_count=n)


def select_dlmmr(
    pool: Pool,
    query,
    k: int,
    lam: float,
    mode: str,
    *,
    table: LengthDiffTable | None = None,
    candidate_limit: int | None = None,
) -> SelectionResult:
    """Greedy argmin of (1-lam)*dist(query, j) - lam*min_{i in T} diff(j, i).

    Query distances are min-max scaled over the pool; length differences are
    read from the lazy table, so no record-record embedding similarity is
    ever evaluated.
    """
    n = _check_k(pool, k)
    _check_lambda(lam)
    if table is None:
        table = LengthDiffTable.from_pool(pool, mode)
    if len(table.lengths) != n:
        raise InputError(f"length table built for n={len(table.lengths)}, pool has n={n}")
    raw = raw_query_distances(pool, query)
    scaled = minmax_scale(raw)
    blocked = _blocked_ids(raw, candidate_limit, k)

    relevance_term = (1.0 - lam) * scaled
    selected: list[int] = []
    traces: list[StepTrace] = []
    min_diff: np.ndarray | None = None
    zeros = np.zeros(n, dtype=np.float64)
    for _ in range(k):
        diversity = zeros if min_diff is None else min_diff
        scores = relevance_term - lam * diversity
        if blocked.size:
            scores[blocked] = np.inf
        if selected:
            scores[selected] = np.inf
        j = int(np.argmin(scores))
        traces.append(
            StepTrace(chosen=j, score=float(scores[j]), relevance=float(scaled[j]), diversity=float(diversity[j]))
        )
        selected.append(j)
        diffs = table.scaled_diffs_to(j)
        min_diff = diffs if min_diff is None else np.minimum(min_diff, diffs)
    return SelectionResult(selected=tuple(selected), step_traces=tuple(traces), score_count=n)


def select(
    pool: Pool,
    query,
    config: SelectionConfig,
    *,
    pairwise: PairwiseSimilarities | None = None,
    table: LengthDiffTable | None = None,
    seed: int | None = None,
) -> SelectionResult:
    """Dispatch one selection according to the config.

    ``seed`` overrides the config seed so batch runs can vary the random
    baseline per query while staying reproducible.
    """
    if config.strategy == "random":
        return select_random(pool, config.k, config.seed if seed is None else seed)
    if config.strategy == "nn":
        return select_nn(pool, query, config.k, candidate_limit=config.candidate_limit)
    lam = config.resolved_lambda()
    if config.strategy == "mmr":
        return select_mmr(
            pool, query, config.k, lam, pairwise=pairwise, candidate_limit=config.candidate_limit
        )
    return select_dlmmr(
        pool,
        query,
        config.k,
        lam,
        config.mode,
        table=table,
        candidate_limit=config.candidate_limit,
    )


def greedy_step_oracle(
    strategy: str,
    pool: Pool,
    query,
    partial_T: list[int],
    lam: float,
    mode: str | None = None,
) -> int:
    """Reference implementation of one greedy step.

    Scores every remaining candidate exhaustively, materializing the full
    pairwise length-difference matrix for dl_mmr and recomputing every
    cosine from scratch for mmr, with the same lower-id tie rule. Slow by
    design; exists to validate the fast paths step by step.
    """
    if strategy not in ("mmr", "dl_mmr"):
        raise InputError(f"oracle supports 'mmr' and 'dl_mmr', got {strategy!r}")
    _check_lambda(lam)
    n = len(pool.records)
    chosen = set(partial_T)
    if any(not 0 <= i < n for i in chosen):
        raise InputError("partial_T contains an id outside the pool")
    remaining = [j for j in range(n) if j not in chosen]
    if not remaining:
        raise InputError("no remaining candidates to score")
    q = query.embedding if isinstance(query, QueryInstance) else query
    embeddings = [r.embedding for r in pool.records]

    if strategy == "mmr":
        best_id, best_score = None, None
        for j in remaining:
            rel = cosine_similarity(q, embeddings[j])
            div = 0.0
            if partial_T:
                div = max(cosine_similarity(embeddings[j], embeddings[i]) for i in partial_T)
            score = (1.0 - lam) * rel - lam * div
            if best_score is None or score > best_score:
                best_id, best_score = j, score
        return best_id

    if mode is None:
        raise InputError("dl_mmr oracle needs a length mode")
    dists = [semantic_distance(q, e) for e in embeddings]
    lo, hi = min(dists), max(dists)
    scaled = [0.0 if hi == lo else (d - lo) / (hi - lo) for d in dists]
    lengths = [r.length_value(mode) for r in pool.records]
    diff_matrix = [[abs(a - b) for b in lengths] for a in lengths]
    flat = [v for row in diff_matrix for v in row]
    mlo, mhi = min(flat), max(flat)
    if mhi == mlo:
        scaled_diff = [[0.0] * n for _ in range(n)]
    else:
        scaled_diff = [[(v - mlo) / (mhi - mlo) for v in row] for row in diff_matrix]

    best_id, best_score = None, None
    for j in remaining:
        div = 0.0
        if partial_T:
            div = min(scaled_diff[j][i] for i in partial_T)
        score = (1.0 - lam) * scaled[j] - lam * div
        if best_score is None or score < best_score:
            best_id, best_score = j, score
    return best_id
