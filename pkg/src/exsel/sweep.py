"""Trade-off-weight sweeps: run one strategy across a lambda grid.

The structural signal tracked per lambda is the spread of the selected
exemplars' length values, averaged over queries; when per-lambda system
outputs exist they can be scored and merged into the same rows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .evaluation import EvalReport
from .pool import Pool
from .scaling import LengthDiffTable
from .selection import (
    DEFAULT_K,
    PairwiseSimilarities,
    SelectionConfig,
    SelectionResult,
    select,
)

DEFAULT_GRID = tuple(round(i / 10, 1) for i in range(11))

SWEEP_COLUMNS = (
    "lambda",
    "strategy",
    "mode",
    "k",
    "queries",
    "len_mean",
    "len_std",
    "r1",
    "r2",
    "rl",
    "delta_cr",
)


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[dict, ...]
    selections: dict[float, list[SelectionResult]]


def sweep_lambda(
    pool: Pool,
    queries,
    strategy: str,
    mode: str | None = None,
    lambdas=DEFAULT_GRID,
    k: int = DEFAULT_K,
    *,
    seed: int = 42,
    evals: dict[float, EvalReport] | None = None,
) -> SweepResult:
    """Run the strategy once per lambda over the query batch.

    Preparation structures are built once and shared across the grid.
    ``evals`` optionally maps lambda values to score reports whose
    aggregates get merged into the matching rows.
    """
    lambdas = tuple(lambdas)
    if not lambdas:
        raise InputError("lambda grid is empty")
    for lam in lambdas:
        if not 0.0 <= lam <= 1.0:
            raise InputError(f"lambda must be in [0, 1], got {lam}")
    if strategy not in ("mmr", "dl_mmr"):
        raise InputError(f"sweep supports 'mmr' and 'dl_mmr', got {strategy!r}")
    length_mode = mode or "tgt_words"
    pairwise = PairwiseSimilarities.build(pool) if strategy == "mmr" else None
    table = LengthDiffTable.from_pool(pool, length_mode) if strategy == "dl_mmr" else None
    lengths = pool.length_values(length_mode)

    rows = []
    selections: dict[float, list[SelectionResult]] = {}
    for lam in lambdas:
        config = SelectionConfig(strategy=strategy, k=k, lam=lam, mode=length_mode, seed=seed)
        results = [
            select(pool, query, config, pairwise=pairwise, table=table) for query in queries
        ]
        selections[lam] = results
        per_query_mean = [float(np.mean(lengths[list(r.selected)])) for r in results]
        per_query_std = [float(np.std(lengths[list(r.selected)])) for r in results]
        row = {
            "lambda": lam,
            "strategy": strategy,
            "mode": length_mode,
            "k": k,
            "queries": len(results),
            "len_mean": float(np.mean(per_query_mean)),
            "len_std": float(np.mean(per_query_std)),
            "r1": None,
            "r2": None,
            "rl": None,
            "delta_cr": None,
        }
        if evals is not None and lam in evals:
            report = evals[lam]
            row.update(r1=report.r1, r2=report.r2, rl=report.rl, delta_cr=report.delta_cr)
        rows.append(row)
    return SweepResult(rows=tuple(rows), selections=selections)


def write_sweep_csv(rows, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow(["" if row[c] is None else row[c] for c in SWEEP_COLUMNS])
