"""Command-line pipeline: pool building, selection, prompts, scoring, benchmarks.

Exit codes: 0 success, 1 bad input (including bad flags), 2 internal error.
Every run echoes its resolved configuration to stderr as one JSON line so
batch logs show exactly what ran.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .costbench import (
    BENCH_STRATEGIES,
    bench,
    render_reference_summary,
    write_cost_csv,
)
from .errors import InputError
from .evaluation import (
    BOOTSTRAP_SAMPLES,
    compare_runs,
    evaluate_records,
    read_generations,
    write_report,
)
from .figures import save_bench_figure, save_eval_figure, save_sweep_figure
from .pool import (
    QueryInstance,
    attach_embeddings,
    ingest_dataset,
    load_pool,
    read_embeddings,
    save_manifest,
    test_embedder,
    word_count,
    write_embeddings,
)
from .prompting import build_prompt
from .scaling import LengthDiffTable
from .selection import (
    DEFAULT_K,
    PairwiseSimilarities,
    SelectionConfig,
    select,
)
from .sweep import DEFAULT_GRID, sweep_lambda, write_sweep_csv

_MODE_BY_FLAG = {"tgt": "tgt_words", "src": "src_words", "cr": "cr"}
_STRATEGY_BY_FLAG = {"random": "random", "nn": "nn", "mmr": "mmr", "dl-mmr": "dl_mmr"}


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as input errors instead of exiting."""

    def error(self, message):
        raise InputError(message)


def _echo_config(command: str, **fields) -> None:
    payload = {"command": command, **fields}
    print("config: " + json.dumps(payload, sort_keys=True), file=sys.stderr)


def _read_query_file(path: Path) -> list[dict]:
    if not path.exists():
        raise InputError(f"query file not found: {path}")
    rows = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict) or "source" not in obj:
                raise InputError(f"{path}:{lineno}: expected an object with a 'source' field")
            if word_count(str(obj["source"])) == 0:
                raise InputError(f"{path}:{lineno}: source has no words")
            rows.append(obj)
    if not rows:
        raise InputError(f"{path}: no queries found")
    return rows


def _load_queries(args, pool) -> list[QueryInstance]:
    rows = _read_query_file(Path(args.queries))
    if args.query_embeddings:
        matrix = read_embeddings(args.query_embeddings)
        if matrix.shape[0] != len(rows):
            raise InputError(
                f"query embedding count mismatch: {matrix.shape[0]} vectors for {len(rows)} queries"
            )
        if pool.dim is not None and matrix.shape[1] != pool.dim:
            raise InputError(
                f"query embeddings have dim {matrix.shape[1]}, pool has dim {pool.dim}"
            )
        vectors = [matrix[i] for i in range(len(rows))]
    elif args.hash_embed:
        vectors = [
            test_embedder(str(row["source"]), pool.dim, seed=args.seed) for row in rows
        ]
    else:
        raise InputError("provide --query-embeddings FILE or --hash-embed")
    return [
        QueryInstance.from_source(str(row["source"]), vec, gold_target=row.get("gold"))
        for row, vec in zip(rows, vectors)
    ]


def _add_query_flags(sub) -> None:
    sub.add_argument("--queries", required=True, help="query JSONL ({'source': ..., 'gold'?: ...})")
    sub.add_argument("--query-embeddings", help="EMB1 file aligned with the query lines")
    sub.add_argument(
        "--hash-embed",
        action="store_true",
        help="embed query sources with the deterministic hash embedder instead",
    )


def _parse_grid(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise InputError(f"bad lambda grid {text!r}: {exc}") from exc
    if not values:
        raise InputError("lambda grid is empty")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="exsel", description=__doc__.splitlines()[0])
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("build-pool", help="ingest a dataset and write a pool manifest")
    sub.add_argument("--dataset", required=True)
    sub.add_argument("--format", choices=("jsonl", "tsv"), default="jsonl")
    sub.add_argument("--embeddings", help="existing EMB1 file, one vector per record")
    sub.add_argument(
        "--hash-dim",
        type=int,
        help="no embedding file: hash-embed record sources at this dimension",
    )
    sub.add_argument("--seed", type=int, default=42)
    sub.add_argument("--out", required=True, help="manifest path (JSON)")

    sub = commands.add_parser("select", help="retrieve exemplar ids for each query")
    sub.add_argument("--pool", required=True, help="pool manifest from build-pool")
    _add_query_flags(sub)
    sub.add_argument("--strategy", choices=tuple(_STRATEGY_BY_FLAG), default="dl-mmr")
    sub.add_argument("--mode", choices=tuple(_MODE_BY_FLAG), default="tgt")
    sub.add_argument("--lambda", dest="lam", type=float, default=None)
    sub.add_argument("--k", type=int, default=DEFAULT_K)
    sub.add_argument("--seed", type=int, default=42)
    sub.add_argument("--jobs", type=int, default=1)
    sub.add_argument("--candidate-limit", type=int, default=None)
    sub.add_argument("--out", required=True, help="selections JSONL")

    sub = commands.add_parser("prompt", help="assemble few-shot prompts from selections")
    sub.add_argument("--pool", required=True)
    sub.add_argument("--queries", required=True)
    sub.add_argument("--selections", help="JSONL from the select step")
    sub.add_argument("--zero-shot", action="store_true", help="open block only, no exemplars")
    sub.add_argument("--out", required=True, help="prompts JSONL")

    sub = commands.add_parser("evaluate", help="score generations against gold targets")
    sub.add_argument("--generations", required=True, help="JSONL with source/gold/hypothesis")
    sub.add_argument("--baseline", help="second generations JSONL to test against")
    sub.add_argument("--samples", type=int, default=BOOTSTRAP_SAMPLES)
    sub.add_argument("--seed", type=int, default=42)
    sub.add_argument("--jobs", type=int, default=1)
    sub.add_argument("--no-figure", action="store_true")
    sub.add_argument("--out", required=True, help="report JSON (CSV and figure land next to it)")

    sub = commands.add_parser("bench", help="measure preparation/inference cost per strategy")
    sub.add_argument("--sizes", default="1000,2000,5000", help="comma-separated pool sizes")
    sub.add_argument(
        "--strategies",
        default=",".join(BENCH_STRATEGIES),
        help="comma-separated subset of random,nn,mmr,dl_mmr",
    )
    sub.add_argument("--queries", type=int, default=100)
    sub.add_argument("--reps", type=int, default=3)
    sub.add_argument("--dim", type=int, default=128)
    sub.add_argument("--k", type=int, default=DEFAULT_K)
    sub.add_argument("--seed", type=int, default=42)
    sub.add_argument("--budget-gb", type=float, default=8.0)
    sub.add_argument("--no-figure", action="store_true")
    sub.add_argument("--out", required=True, help="cost CSV")

    sub = commands.add_parser("sweep-lambda", help="run one strategy across a lambda grid")
    sub.add_argument("--pool", required=True)
    _add_query_flags(sub)
    sub.add_argument("--strategy", choices=("mmr", "dl-mmr"), default="dl-mmr")
    sub.add_argument("--mode", choices=tuple(_MODE_BY_FLAG), default="tgt")
    sub.add_argument("--grid", default=",".join(str(v) for v in DEFAULT_GRID))
    sub.add_argument("--k", type=int, default=DEFAULT_K)
    sub.add_argument("--seed", type=int, default=42)
    sub.add_argument(
        "--hypotheses-template",
        help="per-lambda generations JSONL, '{lam}' replaced by the grid value",
    )
    sub.add_argument("--no-figure", action="store_true")
    sub.add_argument("--out", required=True, help="sweep CSV")

    return parser


def _cmd_build_pool(args) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    pool = ingest_dataset(args.dataset, args.format)
    if args.embeddings:
        embeddings_path = Path(args.embeddings)
        pool = attach_embeddings(pool, embeddings_path)
    elif args.hash_dim:
        rows = [test_embedder(r.source, args.hash_dim, seed=args.seed) for r in pool.records]
        matrix = np.asarray(rows, dtype=np.float32).reshape(len(rows), args.hash_dim)
        embeddings_path = out.with_suffix(".emb")
        write_embeddings(embeddings_path, matrix)
        pool = attach_embeddings(pool, embeddings_path)
    else:
        raise InputError("provide --embeddings FILE or --hash-dim N")
    save_manifest(pool, out, args.dataset, args.format, embeddings_path)
    _echo_config(
        "build-pool",
        dataset=str(args.dataset),
        format=args.format,
        n=len(pool),
        dim=pool.dim,
        out=str(out),
    )
    return 0


def _cmd_select(args) -> int:
    pool = load_pool(args.pool)
    queries = _load_queries(args, pool)
    strategy = _STRATEGY_BY_FLAG[args.strategy]
    mode = _MODE_BY_FLAG[args.mode]
    config = SelectionConfig(
        strategy=strategy,
        k=args.k,
        lam=args.lam,
        mode=mode if strategy == "dl_mmr" else None,
        seed=args.seed,
        candidate_limit=args.candidate_limit,
    )
    _echo_config(
        "select",
        strategy=strategy,
        mode=config.mode,
        **{"lambda": config.resolved_lambda()},
        k=args.k,
        seed=args.seed,
        jobs=args.jobs,
        candidate_limit=args.candidate_limit,
        queries=len(queries),
    )
    pairwise = PairwiseSimilarities.build(pool) if strategy == "mmr" else None
    table = LengthDiffTable.from_pool(pool, config.mode) if strategy == "dl_mmr" else None

    def run_one(indexed):
        qid, query = indexed
        # Vary the random baseline per query, reproducibly.
        result = select(pool, query, config, pairwise=pairwise, table=table, seed=args.seed + qid)
        return qid, result

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(run_one, enumerate(queries)))
    else:
        results = [run_one(item) for item in enumerate(queries)]

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as handle:
        for qid, result in results:
            handle.write(
                json.dumps(
                    {
                        "query_id": qid,
                        "exemplar_ids": list(result.selected),
                        "scores": [t.score for t in result.step_traces],
                    }
                )
                + "\n"
            )
    return 0


def _read_selections(path: Path) -> list[dict]:
    if not path.exists():
        raise InputError(f"selections file not found: {path}")
    rows = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if "query_id" not in obj or "exemplar_ids" not in obj:
                raise InputError(f"{path}:{lineno}: expected 'query_id' and 'exemplar_ids'")
            rows.append(obj)
    return rows


def _cmd_prompt(args) -> int:
    pool = load_pool(args.pool)
    query_rows = _read_query_file(Path(args.queries))
    if args.zero_shot:
        ids_by_query = {qid: [] for qid in range(len(query_rows))}
    elif args.selections:
        ids_by_query = {}
        for row in _read_selections(Path(args.selections)):
            ids_by_query[int(row["query_id"])] = [int(i) for i in row["exemplar_ids"]]
    else:
        raise InputError("provide --selections FILE or --zero-shot")
    _echo_config(
        "prompt",
        zero_shot=bool(args.zero_shot),
        queries=len(query_rows),
        out=str(args.out),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    n = len(pool)
    with out.open("w", encoding="utf-8") as handle:
        for qid, row in enumerate(query_rows):
            if qid not in ids_by_query:
                raise InputError(f"no selection found for query_id {qid}")
            ids = ids_by_query[qid]
            for i in ids:
                if not 0 <= i < n:
                    raise InputError(f"query_id {qid}: exemplar id {i} outside pool of {n}")
            bundle = build_prompt([pool.records[i] for i in ids], str(row["source"]))
            handle.write(json.dumps({"query_id": qid, "prompt": bundle.prompt_text}) + "\n")
    return 0


def _cmd_evaluate(args) -> int:
    records = read_generations(args.generations)
    report = evaluate_records(records, jobs=args.jobs)
    baseline_p = None
    if args.baseline:
        baseline = read_generations(args.baseline)
        baseline_p = compare_runs(records, baseline, samples=args.samples, seed=args.seed)
    config = {
        "generations": str(args.generations),
        "baseline": str(args.baseline) if args.baseline else None,
        "samples": args.samples,
        "seed": args.seed,
    }
    _echo_config("evaluate", n=report.n, **config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_report(report, out, config=config, baseline_p=baseline_p)
    if not args.no_figure:
        save_eval_figure(report, out.with_suffix(".png"))
    print(
        f"r1={report.r1:.2f} r2={report.r2:.2f} rl={report.rl:.2f} "
        f"delta_cr={report.delta_cr:+.2f}"
    )
    if baseline_p is not None:
        print(" ".join(f"p_{k}={v:.5f}" for k, v in baseline_p.items()))
    return 0


def _cmd_bench(args) -> int:
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError as exc:
        raise InputError(f"bad --sizes {args.sizes!r}: {exc}") from exc
    strategies = tuple(s.strip() for s in args.strategies.split(",") if s.strip())
    _echo_config(
        "bench",
        sizes=sizes,
        strategies=list(strategies),
        queries=args.queries,
        reps=args.reps,
        dim=args.dim,
        k=args.k,
        seed=args.seed,
    )
    print(render_reference_summary(), file=sys.stderr)
    reports = bench(
        sizes,
        strategies,
        queries=args.queries,
        repetitions=args.reps,
        seed=args.seed,
        dim=args.dim,
        k=args.k,
        mem_budget=int(args.budget_gb * 1024**3),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_cost_csv(reports, out)
    if not args.no_figure:
        save_bench_figure(reports, out.with_suffix(".png"))
    return 0


def _cmd_sweep(args) -> int:
    pool = load_pool(args.pool)
    queries = _load_queries(args, pool)
    strategy = _STRATEGY_BY_FLAG[args.strategy]
    mode = _MODE_BY_FLAG[args.mode]
    grid = _parse_grid(args.grid)
    evals = None
    if args.hypotheses_template:
        evals = {}
        for lam in grid:
            gen_path = args.hypotheses_template.replace("{lam}", f"{lam:g}")
            evals[lam] = evaluate_records(read_generations(gen_path))
    _echo_config(
        "sweep-lambda",
        strategy=strategy,
        mode=mode,
        grid=list(grid),
        k=args.k,
        seed=args.seed,
        queries=len(queries),
    )
    result = sweep_lambda(
        pool, queries, strategy, mode, grid, args.k, seed=args.seed, evals=evals
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(result.rows, out)
    if not args.no_figure:
        save_sweep_figure(result.rows, out.with_suffix(".png"))
    return 0


_HANDLERS = {
    "build-pool": _cmd_build_pool,
    "select": _cmd_select,
    "prompt": _cmd_prompt,
    "evaluate": _cmd_evaluate,
    "bench": _cmd_bench,
    "sweep-lambda": _cmd_sweep,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 0
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
