"""Summary scoring: ROUGE-1/2/L F1, compression-ratio drift, significance.

Tokenization is deliberately simple (lowercase, alphanumeric runs, no
stemming) and every metric here is checked against brute-force oracles in
the test suite rather than against any external ROUGE script.
"""

from __future__ import annotations

import csv
import json
import math
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .pool import word_count

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

BOOTSTRAP_SAMPLES = 100_000


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs; punctuation and underscores split tokens."""
    return _TOKEN_RE.findall(text.lower())


def _f1_from_counts(matched: int, hyp_total: int, ref_total: int) -> float:
    # 2PR/(P+R) with P = m/H and R = m/R collapses to 2m/(H+R), which stays
    # exact in float arithmetic where the two-division form picks up rounding.
    if hyp_total + ref_total == 0:
        return 0.0
    return 2.0 * matched / (hyp_total + ref_total)


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(hypothesis: str, reference: str, n: int) -> tuple[float, float, float]:
    """Clipped n-gram overlap (precision, recall, F1); zero denominators give 0."""
    if n not in (1, 2):
        raise InputError(f"rouge_n supports n in {{1, 2}}, got {n}")
    hyp = _ngram_counts(tokenize(hypothesis), n)
    ref = _ngram_counts(tokenize(reference), n)
    matched = sum(min(count, ref[gram]) for gram, count in hyp.items())
    hyp_total = sum(hyp.values())
    ref_total = sum(ref.values())
    precision = matched / hyp_total if hyp_total else 0.0
    recall = matched / ref_total if ref_total else 0.0
    return precision, recall, _f1_from_counts(matched, hyp_total, ref_total)


def _lcs_length(a: list[str], b: list[str]) -> int:
    # Two rows suffice; sequences here are sentence-sized.
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            if x == y:
                curr[j] = prev[j - 1] + 1
            else:
                curr[j] = max(prev[j], curr[j - 1])
        prev = curr
    return prev[-1]


def rouge_l(hypothesis: str, reference: str) -> tuple[float, float, float]:
    """LCS-based (precision, recall, F1) over token sequences."""
    hyp = tokenize(hypothesis)
    ref = tokenize(reference)
    lcs = _lcs_length(hyp, ref)
    precision = lcs / len(hyp) if hyp else 0.0
    recall = lcs / len(ref) if ref else 0.0
    return precision, recall, _f1_from_counts(lcs, len(hyp), len(ref))


@dataclass(frozen=True)
class GenerationRecord:
    """One system output next to its gold target and shared source."""

    source: str
    gold: str
    hypothesis: str

    def __post_init__(self) -> None:
        if word_count(self.source) == 0:
            raise InputError("generation record has an empty source")


@dataclass(frozen=True)
class InstanceScores:
    """Per-record metrics; F1 values on the 0-100 scale, ratios raw."""

    r1: float
    r2: float
    rl: float
    gen_cr: float
    gold_cr: float


@dataclass(frozen=True)
class EvalReport:
    """Aggregates (means over instances) plus the per-instance breakdown."""

    r1: float
    r2: float
    rl: float
    delta_cr: float
    per_instance: tuple[InstanceScores, ...]

    @property
    def n(self) -> int:
        return len(self.per_instance)


def delta_cr(records: list[GenerationRecord]) -> float:
    """Mean per-record compression-ratio gap, in percentage points.

    Per record: (hypothesis words - gold words) * 100 / source words, which
    is the difference of the two compression ratios scaled to percent.
    Negative means the system summaries run shorter than gold.
    """
    if not records:
        raise InputError("delta_cr needs at least one record")
    # fsum keeps the mean independent of record order down to the last bit
    total = math.fsum(
        (word_count(r.hypothesis) - word_count(r.gold)) * 100.0 / word_count(r.source)
        for r in records
    )
    return total / len(records)


def score_instance(record: GenerationRecord) -> InstanceScores:
    return InstanceScores(
        r1=100.0 * rouge_n(record.hypothesis, record.gold, 1)[2],
        r2=100.0 * rouge_n(record.hypothesis, record.gold, 2)[2],
        rl=100.0 * rouge_l(record.hypothesis, record.gold)[2],
        gen_cr=word_count(record.hypothesis) / word_count(record.source),
        gold_cr=word_count(record.gold) / word_count(record.source),
    )


def evaluate_records(records: list[GenerationRecord], jobs: int = 1) -> EvalReport:
    if not records:
        raise InputError("no generation records to evaluate")
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            per_instance = tuple(ex.map(score_instance, records))
    else:
        per_instance = tuple(score_instance(r) for r in records)
    return EvalReport(
        r1=float(np.mean([s.r1 for s in per_instance])),
        r2=float(np.mean([s.r2 for s in per_instance])),
        rl=float(np.mean([s.rl for s in per_instance])),
        delta_cr=delta_cr(records),
        per_instance=per_instance,
    )


def paired_bootstrap(
    scores_a,
    scores_b,
    samples: int = BOOTSTRAP_SAMPLES,
    seed: int = 0,
    *,
    batch: int = 1000,
    jobs: int = 1,
) -> float:
    """One-sided paired bootstrap: p = fraction of resamples with mean(a) <= mean(b).

    Resampling happens in fixed-size batches, each with its own generator
    spawned from the seed, so the result does not depend on how many worker
    threads execute the batches.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise InputError("bootstrap inputs must be 1-D score vectors")
    if a.size != b.size:
        raise InputError(f"paired scores differ in length: {a.size} vs {b.size}")
    if a.size < 2:
        raise InputError(f"bootstrap needs at least 2 paired scores, got {a.size}")
    if samples < 1:
        raise InputError(f"samples must be >= 1, got {samples}")

    diff = a - b
    n = diff.size
    n_batches = math.ceil(samples / batch)
    children = np.random.SeedSequence(seed).spawn(n_batches)

    def run_batch(index: int) -> int:
        take = min(batch, samples - index * batch)
        rng = np.random.default_rng(children[index])
        idx = rng.integers(0, n, size=(take, n))
        return int(np.count_nonzero(diff[idx].mean(axis=1) <= 0.0))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            hits = sum(ex.map(run_batch, range(n_batches)))
    else:
        hits = sum(run_batch(i) for i in range(n_batches))
    return hits / samples


def compare_runs(
    records_a: list[GenerationRecord],
    records_b: list[GenerationRecord],
    samples: int = BOOTSTRAP_SAMPLES,
    seed: int = 0,
) -> dict[str, float]:
    """Per-metric bootstrap p-values for run A failing to beat run B."""
    if len(records_a) != len(records_b):
        raise InputError(
            f"runs differ in record count: {len(records_a)} vs {len(records_b)}"
        )
    inst_a = [score_instance(r) for r in records_a]
    inst_b = [score_instance(r) for r in records_b]
    out = {}
    for metric in ("r1", "r2", "rl"):
        va = [getattr(s, metric) for s in inst_a]
        vb = [getattr(s, metric) for s in inst_b]
        out[metric] = paired_bootstrap(va, vb, samples=samples, seed=seed)
    return out


def read_generations(path) -> list[GenerationRecord]:
    """JSONL with keys source/gold/hypothesis; errors carry line numbers."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"generations file not found: {path}")
    records = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise InputError(f"{path}:{lineno}: expected a JSON object")
            for key in ("source", "gold", "hypothesis"):
                if key not in obj:
                    raise InputError(f"{path}:{lineno}: missing {key!r} field")
                if not isinstance(obj[key], str):
                    raise InputError(f"{path}:{lineno}: field {key!r} must be a string")
            if word_count(obj["source"]) == 0:
                raise InputError(f"{path}:{lineno}: source has no words")
            records.append(
                GenerationRecord(source=obj["source"], gold=obj["gold"], hypothesis=obj["hypothesis"])
            )
    if not records:
        raise InputError(f"{path}: no generation records found")
    return records


def write_report(report: EvalReport, json_path, csv_path=None, *, config=None, baseline_p=None) -> None:
    """Aggregate JSON next to a per-instance CSV (same stem by default)."""
    json_path = Path(json_path)
    if csv_path is None:
        csv_path = json_path.with_suffix(".csv")
    payload = {
        "n": report.n,
        "r1": report.r1,
        "r2": report.r2,
        "rl": report.rl,
        "delta_cr": report.delta_cr,
    }
    if baseline_p is not None:
        payload["baseline_p"] = baseline_p
    if config is not None:
        payload["config"] = config
    json_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    with Path(csv_path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "r1", "r2", "rl", "gen_cr", "gold_cr"])
        for i, inst in enumerate(report.per_instance):
            writer.writerow([i, inst.r1, inst.r2, inst.rl, inst.gen_cr, inst.gold_cr])


def evaluate_run(generations_path, report_path, *, csv_path=None, jobs: int = 1, config=None) -> EvalReport:
    """Read a generations file, score it, and write the JSON + CSV reports."""
    records = read_generations(generations_path)
    report = evaluate_records(records, jobs=jobs)
    write_report(report, report_path, csv_path, config=config)
    return report
