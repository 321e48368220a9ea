"""Length-aware diversified exemplar selection for summarization prompts."""

from .errors import InputError
from .evaluation import (
    EvalReport,
    GenerationRecord,
    InstanceScores,
    compare_runs,
    delta_cr,
    evaluate_records,
    evaluate_run,
    paired_bootstrap,
    read_generations,
    rouge_l,
    rouge_n,
    tokenize,
)
from .costbench import (
    CostReport,
    analytic_ratio,
    bench,
    estimate_memory,
    reference_scale_summary,
    score_count,
    synthetic_pool,
    synthetic_queries,
    write_cost_csv,
)
from .instrument import counters
from .pool import (
    ExemplarRecord,
    Pool,
    QueryInstance,
    attach_embeddings,
    ingest_dataset,
    load_pool,
    pool_from_pairs,
    read_embeddings,
    sample_by_length,
    save_manifest,
    test_embedder,
    word_count,
    write_embeddings,
)
from .prompting import PromptBundle, build_prompt, format_block
from .scaling import (
    LengthDiffTable,
    cosine_similarity,
    length_diff,
    minmax_scale,
    query_distances,
    raw_query_distances,
    scaled_length_diff,
    semantic_distance,
)
from .selection import (
    DEFAULT_K,
    PairwiseSimilarities,
    SelectionConfig,
    SelectionResult,
    StepTrace,
    default_lambda,
    greedy_step_oracle,
    select,
    select_dlmmr,
    select_mmr,
    select_nn,
    select_random,
)
from .sweep import DEFAULT_GRID, SweepResult, sweep_lambda, write_sweep_csv

__version__ = "0.1.0"
