import math

import numpy as np
import pytest

from exsel import (
    InputError,
    LengthDiffTable,
    PairwiseSimilarities,
    SelectionConfig,
    cosine_similarity,
    counters,
    default_lambda,
    greedy_step_oracle,
    pool_from_pairs,
    raw_query_distances,
    select,
    select_dlmmr,
    select_mmr,
    select_nn,
    select_random,
)
from helpers import make_query, make_random_pool, unit_rows


def pool_with(vectors, tgt_lens, src_words=10):
    pairs = []
    for i, tgt_len in enumerate(tgt_lens):
        source = " ".join(f"s{i}w{j}" for j in range(src_words))
        target = " ".join(f"t{i}w{j}" for j in range(tgt_len))
        pairs.append((source, target))
    return pool_from_pairs(pairs, embeddings=unit_rows(vectors))


def angle_vec(degrees):
    rad = math.radians(degrees)
    return [math.cos(rad), math.sin(rad)]


# ---------------------------------------------------------------- pairwise


def test_pairwise_matches_direct_cosines():
    pool = make_random_pool(17, 9, seed=1)
    pairwise = PairwiseSimilarities.build(pool)
    assert pairwise.score_count == 17 * 16 // 2
    assert pairwise.nbytes == pairwise.score_count * 8
    for i in range(17):
        for j in range(17):
            direct = 1.0 if i == j else cosine_similarity(
                pool.records[i].embedding, pool.records[j].embedding
            )
            assert pairwise.pair(i, j) == pytest.approx(direct, abs=1e-12)


def test_pairwise_row_gathers_both_triangle_sides():
    pool = make_random_pool(11, 5, seed=2)
    pairwise = PairwiseSimilarities.build(pool)
    for i in (0, 4, 10):
        row = pairwise.row(i)
        expected = [pairwise.pair(i, j) for j in range(11)]
        np.testing.assert_array_equal(row, expected)
        assert row[i] == 1.0


def test_pairwise_blocked_build_matches_single_block():
    pool = make_random_pool(23, 7, seed=3)
    whole = PairwiseSimilarities.build(pool)
    blocked = PairwiseSimilarities.build(pool, block_rows=4)
    np.testing.assert_allclose(blocked.packed, whole.packed, atol=1e-12)


def test_pairwise_counter_matches_formula():
    for n in (2, 5, 24):
        pool = make_random_pool(n, 4, seed=n)
        counters.reset()
        PairwiseSimilarities.build(pool)
        assert counters.pairwise_sim == n * (n - 1) // 2
        assert counters.length_reads == 0


def test_pairwise_rejects_bad_pools():
    bare = pool_from_pairs([("a b", "a")])
    with pytest.raises(InputError, match="no embeddings"):
        PairwiseSimilarities.build(bare)
    zero = pool_from_pairs([("a b", "a"), ("c d", "c")], embeddings=np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(InputError, match="zero embedding"):
        PairwiseSimilarities.build(zero)


# ---------------------------------------------------------------- baselines


def test_nn_hand_case():
    # cosines 0.7 / 0.9 / 0.8 -> distances 0.3 / 0.1 / 0.2
    pool = pool_with([[0.7, math.sqrt(0.51)], [0.9, math.sqrt(0.19)], [0.8, 0.6]], [3, 4, 5])
    query = np.array([1.0, 0.0])
    assert select_nn(pool, query, 2).selected == (1, 2)
    assert select_nn(pool, query, 3).selected == (1, 2, 0)


def test_nn_puts_an_exact_embedding_match_first():
    pool = make_random_pool(9, 5, seed=37)
    query = np.asarray(pool.records[7].embedding, dtype=np.float64)
    assert select_nn(pool, query, 3).selected[0] == 7
    assert select_nn(pool, query, 3).step_traces[0].relevance == 0.0


def test_nn_score_count_and_traces():
    pool = make_random_pool(13, 6, seed=4)
    result = select_nn(pool, make_query(6, seed=5), 4)
    assert result.score_count == 13
    assert len(result.step_traces) == 4
    dists = [t.relevance for t in result.step_traces]
    assert dists == sorted(dists)


def test_random_selection_behaviour():
    pool = make_random_pool(9, 4, seed=6)
    first = select_random(pool, 5, seed=123)
    second = select_random(pool, 5, seed=123)
    assert first.selected == second.selected
    assert len(set(first.selected)) == 5
    assert all(0 <= i < 9 for i in first.selected)
    assert first.score_count == 0
    assert select_random(pool, 5, seed=124).selected != first.selected
    seen = set()
    for s in range(40):
        seen.update(select_random(pool, 5, seed=s).selected)
    assert seen == set(range(9))


def test_k_validation():
    pool = make_random_pool(4, 4, seed=7)
    query = make_query(4, seed=8)
    for bad_k in (0, -1, 5):
        with pytest.raises(InputError):
            select_nn(pool, query, bad_k)
    with pytest.raises(InputError):
        select_random(pool, 5, seed=0)
    with pytest.raises(InputError, match="lambda"):
        select_mmr(pool, query, 2, 1.5)


# ---------------------------------------------------------------- mmr


def test_mmr_hand_case_diversity_flips_second_pick():
    # query at 0 degrees; candidates at 10, 15, 80 degrees.
    pool = pool_with([angle_vec(10), angle_vec(15), angle_vec(80)], [3, 4, 5])
    query = np.array([1.0, 0.0])
    # moderate lambda: the near-duplicate at 15 degrees still wins step 2
    assert select_mmr(pool, query, 2, 0.5).selected == (0, 1)
    # heavier diversity weight: the far candidate at 80 degrees wins instead
    assert select_mmr(pool, query, 2, 0.7).selected == (0, 2)


def test_mmr_first_step_is_pure_relevance():
    pool = make_random_pool(25, 8, seed=9)
    query = make_query(8, seed=10)
    for lam in (0.0, 0.3, 0.9):
        result = select_mmr(pool, query, 3, lam)
        assert result.selected[0] == select_nn(pool, query, 1).selected[0]
        assert result.step_traces[0].diversity == 0.0


def test_mmr_trace_arithmetic():
    pool = make_random_pool(18, 6, seed=11)
    result = select_mmr(pool, make_query(6, seed=12), 5, 0.4)
    for trace in result.step_traces:
        assert trace.score == (1.0 - 0.4) * trace.relevance - 0.4 * trace.diversity
    assert len(set(result.selected)) == 5


def test_mmr_accepts_prebuilt_pairwise_and_validates_size():
    pool = make_random_pool(12, 5, seed=13)
    query = make_query(5, seed=14)
    pairwise = PairwiseSimilarities.build(pool)
    direct = select_mmr(pool, query, 4, 0.5)
    reused = select_mmr(pool, query, 4, 0.5, pairwise=pairwise)
    assert direct.selected == reused.selected
    other = PairwiseSimilarities.build(make_random_pool(7, 5, seed=15))
    with pytest.raises(InputError, match="built for n=7"):
        select_mmr(pool, query, 4, 0.5, pairwise=other)


# ---------------------------------------------------------------- dl_mmr


def test_dlmmr_hand_case():
    # scaled query distances come out as 0 / 0.5 / 1; target lengths 10/10/20.
    vectors = [[0.8, 0.6], [0.6, 0.8], [0.4, math.sqrt(0.84)]]
    pool = pool_with(vectors, [10, 10, 20], src_words=5)
    query = np.array([1.0, 0.0])
    # step 2 at lam=0.5: id1 scores 0.25 - 0, id2 scores 0.5 - 0.5 -> id2 wins
    assert select_dlmmr(pool, query, 2, 0.5, "tgt_words").selected == (0, 2)
    assert select_dlmmr(pool, query, 3, 0.0, "tgt_words").selected == (0, 1, 2)


def test_dlmmr_pure_diversity_picks_distinct_length():
    vectors = [[0.8, 0.6], [0.6, 0.8], [0.4, math.sqrt(0.84)]]
    pool = pool_with(vectors, [10, 10, 20], src_words=5)
    query = np.array([1.0, 0.0])
    result = select_dlmmr(pool, query, 2, 1.0, "tgt_words")
    assert result.selected[0] == 0  # all-zero scores tie, lowest id wins
    assert pool.records[result.selected[1]].tgt_len == 20


def test_dlmmr_never_touches_pairwise_counter():
    pool = make_random_pool(30, 8, seed=16)
    query = make_query(8, seed=17)
    counters.reset()
    select_dlmmr(pool, query, 6, 0.1, "tgt_words")
    assert counters.pairwise_sim == 0
    assert counters.query_sim == 30
    assert counters.length_reads == 30


def test_dlmmr_equal_lengths_collapse_to_relevance():
    # all targets the same length: the diversity term is identically zero
    vectors = unit_rows(np.random.default_rng(18).standard_normal((8, 6)))
    pool = pool_with(vectors, [4] * 8)
    query = make_query(6, seed=19)
    for lam in (0.2, 0.7):
        assert (
            select_dlmmr(pool, query, 3, lam, "tgt_words").selected
            == select_nn(pool, query, 3).selected
        )


def test_dlmmr_accepts_prebuilt_table_and_validates_size():
    pool = make_random_pool(14, 5, seed=20)
    query = make_query(5, seed=21)
    table = LengthDiffTable.from_pool(pool, "cr")
    direct = select_dlmmr(pool, query, 4, 0.1, "cr")
    reused = select_dlmmr(pool, query, 4, 0.1, "cr", table=table)
    assert direct.selected == reused.selected
    other = LengthDiffTable.from_pool(make_random_pool(6, 5, seed=22), "cr")
    with pytest.raises(InputError, match="built for n=6"):
        select_dlmmr(pool, query, 4, 0.1, "cr", table=other)


def test_dlmmr_trace_arithmetic():
    pool = make_random_pool(16, 7, seed=23)
    lam = 0.3
    result = select_dlmmr(pool, make_query(7, seed=24), 5, lam, "src_words")
    for trace in result.step_traces:
        assert trace.score == (1.0 - lam) * trace.relevance - lam * trace.diversity


# ---------------------------------------------------------------- ties


def test_duplicate_embeddings_break_ties_by_lower_id():
    v = [0.9, math.sqrt(0.19)]
    w = [0.5, math.sqrt(0.75)]
    pool = pool_with([v, w, v, w], [3, 5, 3, 5])
    query = np.array([1.0, 0.0])
    assert select_nn(pool, query, 4).selected == (0, 2, 1, 3)
    assert select_mmr(pool, query, 4, 0.0).selected == (0, 2, 1, 3)
    assert select_dlmmr(pool, query, 4, 0.0, "tgt_words").selected == (0, 2, 1, 3)


# ---------------------------------------------------------------- candidate limit


def test_candidate_limit_prefilters_by_relevance():
    pool = make_random_pool(40, 8, seed=25)
    query = make_query(8, seed=26)
    dists = raw_query_distances(pool, query)
    shortlist = set(np.argsort(dists, kind="stable")[:10])
    for result in (
        select_mmr(pool, query, 5, 0.6, candidate_limit=10),
        select_dlmmr(pool, query, 5, 0.6, "tgt_words", candidate_limit=10),
    ):
        assert set(result.selected) <= shortlist
    with pytest.raises(InputError, match="candidate_limit"):
        select_mmr(pool, query, 5, 0.5, candidate_limit=4)
    wide_open = select_dlmmr(pool, query, 5, 0.6, "tgt_words", candidate_limit=40)
    plain = select_dlmmr(pool, query, 5, 0.6, "tgt_words")
    assert wide_open.selected == plain.selected


# ---------------------------------------------------------------- config + dispatch


def test_default_lambda_table():
    assert default_lambda("mmr") == 0.5
    assert default_lambda("dl_mmr", "tgt_words") == 0.1
    assert default_lambda("dl_mmr", "cr") == 0.1
    assert default_lambda("dl_mmr", "src_words") == 0.5
    assert default_lambda("nn") == 0.0
    assert default_lambda("random") == 0.0


def test_config_validation_and_defaults():
    config = SelectionConfig(strategy="dl_mmr")
    assert config.mode == "tgt_words"
    assert config.k == 8
    assert config.resolved_lambda() == 0.1
    assert SelectionConfig(strategy="dl_mmr", mode="src_words").resolved_lambda() == 0.5
    assert SelectionConfig(strategy="mmr").resolved_lambda() == 0.5
    assert SelectionConfig(strategy="mmr", lam=0.9).resolved_lambda() == 0.9
    with pytest.raises(InputError, match="unknown strategy"):
        SelectionConfig(strategy="knn")
    with pytest.raises(InputError, match="lambda"):
        SelectionConfig(strategy="mmr", lam=-0.1)
    with pytest.raises(InputError, match="unknown length mode"):
        SelectionConfig(strategy="dl_mmr", mode="chars")
    with pytest.raises(InputError, match="k must be"):
        SelectionConfig(strategy="nn", k=0)
    with pytest.raises(InputError, match="candidate_limit"):
        SelectionConfig(strategy="nn", k=8, candidate_limit=3)


def test_select_dispatcher_routes_and_seeds():
    pool = make_random_pool(20, 6, seed=27)
    query = make_query(6, seed=28)
    nn = select(pool, query, SelectionConfig(strategy="nn", k=3))
    assert nn.selected == select_nn(pool, query, 3).selected
    mmr = select(pool, query, SelectionConfig(strategy="mmr", k=3))
    assert mmr.selected == select_mmr(pool, query, 3, 0.5).selected
    dl = select(pool, query, SelectionConfig(strategy="dl_mmr", k=3, mode="cr"))
    assert dl.selected == select_dlmmr(pool, query, 3, 0.1, "cr").selected
    config = SelectionConfig(strategy="random", k=3, seed=5)
    assert select(pool, query, config).selected == select_random(pool, 3, seed=5).selected
    assert select(pool, query, config, seed=99).selected == select_random(pool, 3, seed=99).selected


# ---------------------------------------------------------------- oracle


def test_k_equal_one_is_the_nn_top_pick_below_lambda_one():
    # With T empty the diversity term is 0, so the first step is pure
    # relevance whenever the relevance weight (1 - lambda) is non-zero.
    # At exactly lambda = 1 every first-step score collapses to 0 and the
    # id tie rule decides instead (see the pure-diversity test above).
    pool = make_random_pool(12, 6, seed=33)
    query = make_query(6, seed=34)
    top = select_nn(pool, query, 1).selected
    for lam in (0.0, 0.25, 0.5, 0.9):
        assert select_mmr(pool, query, 1, lam).selected == top
        assert select_dlmmr(pool, query, 1, lam, "tgt_words").selected == top


def test_oracle_with_all_but_one_left_returns_the_remainder():
    pool = make_random_pool(6, 4, seed=35)
    query = make_query(4, seed=36)
    rest = [0, 1, 2, 4, 5]
    assert greedy_step_oracle("mmr", pool, query, rest, 0.5) == 3
    assert greedy_step_oracle("dl_mmr", pool, query, rest, 0.5, "cr") == 3


def test_oracle_validates_input():
    pool = make_random_pool(5, 4, seed=29)
    query = make_query(4, seed=30)
    with pytest.raises(InputError, match="oracle supports"):
        greedy_step_oracle("nn", pool, query, [], 0.5)
    with pytest.raises(InputError, match="length mode"):
        greedy_step_oracle("dl_mmr", pool, query, [], 0.5)
    with pytest.raises(InputError, match="outside the pool"):
        greedy_step_oracle("mmr", pool, query, [9], 0.5)
    with pytest.raises(InputError, match="no remaining"):
        greedy_step_oracle("mmr", pool, query, [0, 1, 2, 3, 4], 0.5)


def test_fast_paths_match_oracle_on_random_instances():
    rng = np.random.default_rng(31)
    lambdas = [round(x / 10, 1) for x in range(11)]
    modes = ["tgt_words", "src_words", "cr"]
    for trial in range(40):
        n = int(rng.integers(4, 20))
        dim = int(rng.integers(3, 8))
        k = int(rng.integers(1, min(8, n) + 1))
        lam = lambdas[trial % len(lambdas)]
        mode = modes[trial % len(modes)]
        pool = make_random_pool(n, dim, seed=1000 + trial)
        query = make_query(dim, seed=2000 + trial)
        fast_dl = select_dlmmr(pool, query, k, lam, mode).selected
        fast_mmr = select_mmr(pool, query, k, lam).selected
        partial_dl, partial_mmr = [], []
        for step in range(k):
            expect_dl = greedy_step_oracle("dl_mmr", pool, query, partial_dl, lam, mode)
            assert fast_dl[step] == expect_dl, (trial, step, lam, mode)
            partial_dl.append(expect_dl)
            expect_mmr = greedy_step_oracle("mmr", pool, query, partial_mmr, lam)
            assert fast_mmr[step] == expect_mmr, (trial, step, lam)
            partial_mmr.append(expect_mmr)
