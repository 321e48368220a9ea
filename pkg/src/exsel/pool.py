"""Exemplar pool construction, persistence, and length bookkeeping.

A pool is an immutable, densely indexed collection of (source, target)
pairs with word counts, compression ratios, and one embedding vector per
record. Everything downstream (selection, benchmarking, prompting) reads
from a frozen pool, so construction is the only place records are created.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError

logger = logging.getLogger(__name__)

EMBEDDING_MAGIC = b"EMB1"

# Scalars a record can be ranked by: target word count, source word count,
# or compression ratio.
LENGTH_MODES = ("tgt_words", "src_words", "cr")


def word_count(text: str) -> int:
    """Number of maximal whitespace-separated tokens.

    Punctuation stays attached to its token; empty or whitespace-only
    text counts 0.
    """
    return len(text.split())


@dataclass(frozen=True)
class ExemplarRecord:
    """One (source, target) pair with its length statistics and embedding."""

    id: int
    source: str
    target: str
    src_len: int
    tgt_len: int
    cr: float
    embedding: np.ndarray | None = None

    def length_value(self, mode: str) -> float:
        if mode == "tgt_words":
            return float(self.tgt_len)
        if mode == "src_words":
            return float(self.src_len)
        if mode == "cr":
            return self.cr
        raise InputError(f"unknown length mode {mode!r}; expected one of {LENGTH_MODES}")


@dataclass(frozen=True)
class QueryInstance:
    """A query to retrieve exemplars for; gold target is evaluation-only."""

    source: str
    src_len: int
    embedding: np.ndarray
    gold_target: str | None = None

    @classmethod
    def from_source(
        cls, source: str, embedding: np.ndarray, gold_target: str | None = None
    ) -> "QueryInstance":
        return cls(source=source, src_len=word_count(source), embedding=embedding, gold_target=gold_target)


@dataclass(frozen=True)
class Pool:
    """Frozen, densely indexed exemplar collection.

    ``embeddings`` is the (n, dim) matrix backing each record's vector; it is
    None until :func:`attach_embeddings` runs. The pool is safe for concurrent
    reads from any number of selection workers.
    """

    records: tuple[ExemplarRecord, ...]
    dim: int | None
    length_stats: dict[str, tuple[float, float]]
    embeddings: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.records)

    def length_values(self, mode: str) -> np.ndarray:
        if mode not in LENGTH_MODES:
            raise InputError(f"unknown length mode {mode!r}; expected one of {LENGTH_MODES}")
        return np.array([r.length_value(mode) for r in self.records], dtype=np.float64)

    def length_range(self, mode: str) -> tuple[float, float]:
        if mode not in self.length_stats:
            raise InputError(f"pool has no length stats for mode {mode!r}")
        return self.length_stats[mode]


def _compute_length_stats(records: Sequence[ExemplarRecord]) -> dict[str, tuple[float, float]]:
    if not records:
        return {}
    stats = {}
    for mode in LENGTH_MODES:
        values = [r.length_value(mode) for r in records]
        stats[mode] = (min(values), max(values))
    return stats


def _freeze_embeddings(matrix: np.ndarray) -> np.ndarray:
    matrix = np.ascontiguousarray(matrix, dtype=np.float32)
    matrix.setflags(write=False)
    return matrix


def pool_from_pairs(
    pairs: Iterable[tuple[str, str]], embeddings: np.ndarray | None = None
) -> Pool:
    """Build a pool from in-memory (source, target) pairs.

    Ids are assigned in iteration order. Sources without any word are
    rejected because the compression ratio would be undefined.
    """
    records = []
    empty_targets = 0
    for idx, (source, target) in enumerate(pairs):
        src_len = word_count(source)
        tgt_len = word_count(target)
        if src_len == 0:
            raise InputError(f"record {idx}: source has no words (compression ratio undefined)")
        if tgt_len == 0:
            empty_targets += 1
        records.append(
            ExemplarRecord(
                id=idx,
                source=source,
                target=target,
                src_len=src_len,
                tgt_len=tgt_len,
                cr=tgt_len / src_len,
            )
        )
    if empty_targets:
        logger.warning("%d of %d records have an empty target", empty_targets, len(records))
    pool = Pool(
        records=tuple(records),
        dim=None,
        length_stats=_compute_length_stats(records),
        embeddings=None,
    )
    if embeddings is not None:
        pool = _with_embeddings(pool, np.asarray(embeddings))
    return pool


def _with_embeddings(pool: Pool, matrix: np.ndarray) -> Pool:
    n = len(pool.records)
    if matrix.ndim != 2:
        raise InputError(f"embedding matrix must be 2-D, got shape {matrix.shape}")
    if matrix.shape[0] != n:
        raise InputError(f"embedding count mismatch: expected {n} rows, found {matrix.shape[0]}")
    matrix = _freeze_embeddings(matrix)
    records = tuple(
        ExemplarRecord(
            id=r.id,
            source=r.source,
            target=r.target,
            src_len=r.src_len,
            tgt_len=r.tgt_len,
            cr=r.cr,
            embedding=matrix[i],
        )
        for i, r in enumerate(pool.records)
    )
    return Pool(
        records=records,
        dim=int(matrix.shape[1]),
        length_stats=pool.length_stats,
        embeddings=matrix,
    )


def ingest_dataset(path: str | Path, format: str = "jsonl") -> Pool:
    """Load a dataset file into a pool without embeddings.

    JSONL lines need "source" and "target" keys; TSV lines need two
    tab-separated columns in that order. Errors include the 1-based line
    number of the offending record.
    """
    path = Path(path)
    if format not in ("jsonl", "tsv"):
        raise InputError(f"unknown dataset format {format!r}; expected 'jsonl' or 'tsv'")
    if not path.exists():
        raise InputError(f"dataset file not found: {path}")

    pairs = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            if format == "jsonl":
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise InputError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
                if not isinstance(obj, dict):
                    raise InputError(f"{path}:{lineno}: expected a JSON object")
                for key in ("source", "target"):
                    if key not in obj:
                        raise InputError(f"{path}:{lineno}: missing {key!r} field")
                source, target = str(obj["source"]), str(obj["target"])
            else:
                columns = line.rstrip("\n").split("\t")
                if len(columns) != 2:
                    raise InputError(
                        f"{path}:{lineno}: expected 2 tab-separated columns, found {len(columns)}"
                    )
                source, target = columns
            if word_count(source) == 0:
                raise InputError(
                    f"{path}:{lineno}: source has no words (compression ratio undefined)"
                )
            pairs.append((source, target))
    return pool_from_pairs(pairs)


def write_embeddings(path: str | Path, matrix: np.ndarray) -> None:
    """Write an (n, dim) matrix in the little-endian EMB1 binary format."""
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise InputError(f"embedding matrix must be 2-D, got shape {matrix.shape}")
    count, dim = matrix.shape
    header = EMBEDDING_MAGIC + np.array([count, dim], dtype="<u4").tobytes()
    Path(path).write_bytes(header + matrix.tobytes(order="C"))


def read_embeddings(path: str | Path) -> np.ndarray:
    """Read an EMB1 binary file into an (n, dim) float32 matrix."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"embedding file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < 12 or raw[:4] != EMBEDDING_MAGIC:
        raise InputError(f"{path}: not an EMB1 embedding file")
    count, dim = np.frombuffer(raw, dtype="<u4", count=2, offset=4)
    count, dim = int(count), int(dim)
    expected = 12 + 4 * count * dim
    if len(raw) != expected:
        raise InputError(
            f"{path}: truncated embedding file (expected {expected} bytes, found {len(raw)})"
        )
    body = np.frombuffer(raw, dtype="<f4", count=count * dim, offset=12)
    return body.reshape(count, dim).copy()


def attach_embeddings(pool: Pool, embedding_file: str | Path) -> Pool:
    """Attach per-record embeddings read from an EMB1 file."""
    matrix = read_embeddings(embedding_file)
    return _with_embeddings(pool, matrix)


def test_embedder(text: str, dim: int, seed: int = 0) -> np.ndarray:
    """Deterministic stand-in embedder: a unit vector from token hashes.

    Identical text always maps to the identical vector; the seed shifts the
    whole embedding space so distinct seeds disagree on the same text. Only
    meant for hermetic tests and synthetic benchmarks.
    """
    if dim < 1:
        raise InputError(f"embedding dimension must be >= 1, got {dim}")
    tokens = text.split() or [""]
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokens:
        digest = hashlib.sha256(f"{seed}\x1f{token}".encode("utf-8")).digest()
        token_rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        vec += token_rng.standard_normal(dim)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        vec[0] = 1.0
        norm = 1.0
    return vec / norm


def sample_by_length(
    pool: Pool,
    mode: str,
    desired_value: float,
    tolerance: float,
    k: int,
    seed: int,
) -> list[ExemplarRecord]:
    """Sample k records whose mode-value is within +/-tolerance of a target.

    Sampling is uniform without replacement and deterministic under the seed.
    """
    if mode not in ("tgt_words", "cr"):
        raise InputError(f"unsupported sampling mode {mode!r}; expected 'tgt_words' or 'cr'")
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if tolerance < 0:
        raise InputError(f"tolerance must be >= 0, got {tolerance}")
    eligible = [
        r for r in pool.records if abs(r.length_value(mode) - desired_value) <= tolerance
    ]
    if len(eligible) < k:
        raise InputError(
            f"only {len(eligible)} records within {tolerance} of {desired_value} "
            f"for mode {mode!r}; need {k}"
        )
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(eligible), size=k, replace=False)
    return [eligible[int(i)] for i in chosen]


def _stats_to_json(stats: dict[str, tuple[float, float]]) -> dict:
    return {mode: [lo, hi] for mode, (lo, hi) in stats.items()}


def _stats_from_json(obj: dict) -> dict[str, tuple[float, float]]:
    return {mode: (float(lo), float(hi)) for mode, (lo, hi) in obj.items()}


def save_manifest(
    pool: Pool,
    manifest_path: str | Path,
    dataset_path: str | Path,
    dataset_format: str,
    embeddings_path: str | Path,
) -> None:
    """Persist a pool as a manifest referencing its dataset and embedding files.

    Paths are stored relative to the manifest directory when possible so the
    bundle can be moved as a unit.
    """
    manifest_path = Path(manifest_path)
    base = manifest_path.resolve().parent

    def _relativize(p: str | Path) -> str:
        p = Path(p).resolve()
        try:
            return str(p.relative_to(base))
        except ValueError:
            return str(p)

    manifest = {
        "format_version": 1,
        "dataset": _relativize(dataset_path),
        "dataset_format": dataset_format,
        "embeddings": _relativize(embeddings_path),
        "n": len(pool.records),
        "dim": pool.dim,
        "length_stats": _stats_to_json(pool.length_stats),
    }
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def load_pool(manifest_path: str | Path) -> Pool:
    """Rebuild a pool from its manifest, checking the stored statistics.

    Lengths and compression ratios are recomputed from the dataset and
    verified against the manifest so silent file swaps are caught.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise InputError(f"manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{manifest_path}: malformed manifest JSON ({exc.msg})") from exc
    base = manifest_path.resolve().parent

    def _resolve(p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else base / path

    pool = ingest_dataset(_resolve(manifest["dataset"]), manifest.get("dataset_format", "jsonl"))
    pool = attach_embeddings(pool, _resolve(manifest["embeddings"]))
    if len(pool.records) != manifest["n"]:
        raise InputError(
            f"{manifest_path}: dataset has {len(pool.records)} records, manifest says {manifest['n']}"
        )
    if pool.dim != manifest["dim"]:
        raise InputError(
            f"{manifest_path}: embeddings have dim {pool.dim}, manifest says {manifest['dim']}"
        )
    stored = _stats_from_json(manifest["length_stats"])
    if stored != pool.length_stats:
        raise InputError(f"{manifest_path}: stored length stats do not match the dataset")
    return pool
