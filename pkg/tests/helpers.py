"""Shared test fixtures-by-hand: random pools and queries with varied lengths."""

import numpy as np

from exsel import Pool, QueryInstance, pool_from_pairs


def make_random_pool(n: int, dim: int, seed: int) -> Pool:
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n):
        src_words = int(rng.integers(4, 16))
        tgt_words = int(rng.integers(1, 10))
        source = " ".join(f"s{i}w{j}" for j in range(src_words))
        target = " ".join(f"t{i}w{j}" for j in range(tgt_words))
        pairs.append((source, target))
    emb = rng.standard_normal((n, dim))
    emb /= np.linalg.norm(emb, axis=1, keepdims=True)
    return pool_from_pairs(pairs, embeddings=emb.astype(np.float32))


def make_query(dim: int, seed: int) -> QueryInstance:
    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(dim)
    vec /= np.linalg.norm(vec)
    return QueryInstance.from_source(f"query seed {seed}", vec.astype(np.float32))


def unit_rows(vectors) -> np.ndarray:
    matrix = np.asarray(vectors, dtype=np.float64)
    return matrix / np.linalg.norm(matrix, axis=1, keepdims=True)
