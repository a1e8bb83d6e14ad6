import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expressive_kge.evaluation import (
    evaluate,
    random_ranking_mrr,
    rank_from_scores,
    tie_rank,
)
from expressive_kge.expressiveness import build_capturing_model
from expressive_kge.kg import build_filter_index, classify_relation_cardinality, parse_triples
from expressive_kge.model import ModelConfig, score
from expressive_kge.training import init_model

GRAPH_TRAIN = ["a\tr\tb", "b\tr\tc", "c\tq\ta", "a\tq\td", "d\tr\te", "e\tq\tb"]
GRAPH_VALID = ["a\tr\tc"]
GRAPH_TEST = ["b\tq\tc", "d\tr\tb", "e\tr\ta"]


def brute_rank(model, kg, triple, side):
    """Rank by explicit enumeration of candidate triples and a pairwise comparison."""
    h, r, t = triple
    known = set(map(tuple, np.concatenate([kg.train, kg.valid, kg.test]).tolist()))
    gold = score(model, np.array([triple]))[0]
    greater = tied = 0
    for e in range(kg.n_entities):
        cand = (e, r, t) if side == "head" else (h, r, e)
        if cand == tuple(triple) or cand in known:
            continue
        s = score(model, np.array([cand]))[0]
        greater += s > gold
        tied += s == gold
    lo, hi = 1 + greater, 1 + greater + tied
    return int(np.floor((lo + hi) / 2 + 0.5))


def test_tie_policy():
    assert tie_rank(0, 0) == 1
    assert tie_rank(0, 4) == 3
    assert tie_rank(2, 1) == 4  # 3.5 rounds up
    assert rank_from_scores(np.zeros(5), 2) == 3


def test_filtered_candidates_are_removed_but_not_gold():
    scores = np.array([0.1, 0.9, 0.5, 0.7])
    assert rank_from_scores(scores, 2) == 3
    assert rank_from_scores(scores, 2, filtered={1, 2}) == 2
    assert rank_from_scores(scores, 2, filtered={1, 3}) == 1


def test_two_query_example():
    # zero slopes and centers: the score only depends on |e_h| and |e_t|
    kg = parse_triples(["c\tr\td"], [], ["a\tr\tb"], entities=["a", "b", "c", "d", "f"])
    m = ModelConfig(
        entities=np.array([[0.0], [3.0], [1.0], [2.0], [4.0]]),
        c_h=np.zeros((1, 1)), c_t=np.zeros((1, 1)), d_h=np.zeros((1, 1)), d_t=np.zeros((1, 1)),
        r_h=np.zeros((1, 1)), r_t=np.zeros((1, 1)),
    )
    report = evaluate(m, kg)
    assert (report.ranks["head"][0], report.ranks["tail"][0]) == (1, 4)
    assert report.mrr == pytest.approx(0.625)
    assert report.hits_at == {1: 0.5, 3: 0.5, 10: 1.0}


def test_evaluate_matches_brute_force():
    kg = parse_triples(GRAPH_TRAIN, GRAPH_VALID, GRAPH_TEST)
    for seed in range(5):
        m = init_model(kg, 3, seed=seed)
        report = evaluate(m, kg)
        want_head = [brute_rank(m, kg, tuple(tr), "head") for tr in kg.test.tolist()]
        want_tail = [brute_rank(m, kg, tuple(tr), "tail") for tr in kg.test.tolist()]
        assert report.ranks["head"].tolist() == want_head
        assert report.ranks["tail"].tolist() == want_tail
        all_ranks = np.array(want_head + want_tail)
        assert report.mrr == pytest.approx(np.mean(1 / all_ranks))
        assert report.n_queries == 2 * len(kg.test)


def test_constant_model_ties_everything():
    kg = parse_triples(GRAPH_TRAIN, [], GRAPH_TEST)
    m = init_model(kg, 2)
    m.entities[:] = 0.0
    report = evaluate(m, kg)
    for (h, r, t), hr, tr in zip(kg.test.tolist(), report.ranks["head"], report.ranks["tail"]):
        flt = build_filter_index(kg)
        n_head = kg.n_entities - len(flt.heads(r, t) - {h})
        n_tail = kg.n_entities - len(flt.tails(r, h) - {t})
        assert hr == tie_rank(0, n_head - 1)
        assert tr == tie_rank(0, n_tail - 1)


def test_per_relation_and_cardinality_strata():
    kg = parse_triples(GRAPH_TRAIN, [], GRAPH_TEST + ["a\tnew\tb"])
    m = init_model(kg, 3, seed=1)
    report = evaluate(m, kg)
    assert set(report.per_relation) == {"r", "q", "new"}
    assert ("Undefined", "head") in report.per_cardinality
    q = kg.relation_index["q"]
    mask = kg.test[:, 1] == q
    want = np.mean(np.concatenate([1 / report.ranks["head"][mask], 1 / report.ranks["tail"][mask]]))
    assert report.per_relation["q"] == pytest.approx(want)
    assert "MRR" in report.to_table() and '"mrr"' in report.to_json()


def test_empty_split_rejected():
    kg = parse_triples(GRAPH_TRAIN)
    with pytest.raises(ValueError):
        evaluate(init_model(kg, 2), kg)


def test_random_ranking_baseline():
    assert random_ranking_mrr(1) == 1.0
    assert random_ranking_mrr(4) == pytest.approx((1 + 1 / 2 + 1 / 3 + 1 / 4) / 4)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=2, max_size=30), st.data())
def test_rank_bounds_and_filter_monotonicity(values, data):
    scores = np.array(values, dtype=float)
    gold = data.draw(st.integers(0, len(scores) - 1))
    extra = data.draw(st.sets(st.integers(0, len(scores) - 1)))
    raw = rank_from_scores(scores, gold)
    filt = rank_from_scores(scores, gold, extra)
    assert 1 <= filt <= raw <= len(scores)


def test_perfect_model_reaches_rank_one():
    # each entity sits at its own point; relation maps x to x + 1 exactly
    kg = parse_triples(["e0\tr\te1", "e1\tr\te2"], [], ["e2\tr\te3"])
    m = ModelConfig(
        entities=np.arange(4, dtype=float).reshape(-1, 1),
        c_h=np.array([[-1.0]]), c_t=np.array([[1.0]]), d_h=np.zeros((1, 1)), d_t=np.zeros((1, 1)),
        r_h=np.ones((1, 1)), r_t=np.ones((1, 1)),
    )
    report = evaluate(m, kg)
    assert report.mrr == 1.0 and report.hits_at[1] == 1.0


def test_strata_aggregate_to_global_mrr():
    kg = parse_triples(GRAPH_TRAIN, GRAPH_VALID, GRAPH_TEST + ["a\tnew\tb"])
    report = evaluate(init_model(kg, 3, seed=4), kg)
    counts = {kg.relations[r]: 2 * int(np.sum(kg.test[:, 1] == r)) for r in range(kg.n_relations)}
    by_rel = sum(report.per_relation[r] * n for r, n in counts.items() if n) / report.n_queries
    assert by_rel == pytest.approx(report.mrr)
    n_card = {}
    for (tag, side) in report.per_cardinality:
        rels = [r for r in range(kg.n_relations) if np.any(kg.test[:, 1] == r)]
        n_card[(tag, side)] = sum(
            int(np.sum(kg.test[:, 1] == r)) for r in rels
            if (tag == "Undefined" and not np.any(kg.train[:, 1] == r))
            or (tag != "Undefined" and np.any(kg.train[:, 1] == r)
                and classify_relation_cardinality(kg, kg.relations[r]).tag == tag)
        )
    by_card = sum(report.per_cardinality[k] * n for k, n in n_card.items()) / report.n_queries
    assert by_card == pytest.approx(report.mrr)


def test_constructed_model_ranks_test_triples_first():
    kg = parse_triples(["a\tr\tb", "b\tr\tc", "c\tq\ta", "d\tq\tb", "a\tq\td"], [], ["c\tr\td", "b\tq\tc"])
    report = evaluate(build_capturing_model(kg), kg)
    assert report.mrr == 1.0 and report.hits_at[1] == 1.0
