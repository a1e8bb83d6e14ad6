import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expressive_kge.expressiveness import (
    CapExceededError,
    SelfLoopError,
    add_self_loop_exclusions,
    all_triples,
    audit_assumptions,
    base_case,
    build_capturing_model,
    falsify_triple,
    verify_truth_table,
)
from expressive_kge.kg import KnowledgeGraph, parse_triples
from expressive_kge.model import is_true


def graph_from_ids(n_e, n_r, triples):
    arr = np.array(sorted(set(triples)), dtype=np.int64).reshape(-1, 3)
    return KnowledgeGraph([f"e{i}" for i in range(n_e)], [f"r{i}" for i in range(n_r)], arr)


def test_base_case_makes_everything_true():
    m = base_case(3, 2)
    assert m.dim == 6
    assert is_true(m, all_triples(3, 2)).all()
    audit_assumptions(m, 0.5)


def test_falsify_changes_exactly_one_triple():
    rng = np.random.default_rng(0)
    n_e, n_r = 4, 2
    m = base_case(n_e, n_r)
    cand = all_triples(n_e, n_r)
    off_diag = [tuple(t) for t in cand.tolist() if t[0] != t[2]]
    for idx in rng.permutation(len(off_diag))[:8]:
        h, r, t = off_diag[idx]
        before = is_true(m, cand)
        falsify_triple(m, r, h, t)
        after = is_true(m, cand)
        changed = np.nonzero(before != after)[0]
        assert [tuple(cand[c]) for c in changed] == [(h, r, t)]


def test_falsify_rejects_self_loops_and_false_triples():
    m = base_case(2, 1)
    with pytest.raises(SelfLoopError):
        falsify_triple(m, 0, 1, 1)
    falsify_triple(m, 0, 0, 1)
    with pytest.raises(ValueError):
        falsify_triple(m, 0, 0, 1)


def test_self_loop_dimension_excludes_only_its_loop():
    m = base_case(3, 2)
    out = add_self_loop_exclusions(m, [(1, 2)])
    assert out.dim == m.dim + 1
    truth = is_true(out, all_triples(3, 2))
    false = [tuple(t) for t, ok in zip(all_triples(3, 2).tolist(), truth) if not ok]
    assert false == [(2, 1, 2)]


def test_capture_small_graph_with_loops():
    kg = parse_triples(["a\tr\tb", "b\tr\tb", "b\tq\ta"], [], ["a\tq\ta"])
    m = build_capturing_model(kg)
    report = verify_truth_table(m, kg)
    assert report.exact and report.n_triples == 2 * 2 * 2
    # two loops are absent: r(a,a) and q(b,b)
    assert report.dim == 4 + 2


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.data())
def test_capture_is_exact_on_random_graphs(n_e, n_r, data):
    cand = [tuple(t) for t in all_triples(n_e, n_r).tolist()]
    chosen = data.draw(st.lists(st.sampled_from(cand), unique=True, max_size=len(cand)))
    kg = graph_from_ids(n_e, n_r, chosen)
    m = build_capturing_model(kg)
    report = verify_truth_table(m, kg)
    assert report.exact, report.to_dict()


def test_falsification_order_does_not_change_truth_table():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        kg = parse_triples(["a\tr\tb", "b\tr\tc", "c\tq\ta", "a\tq\ta"])
    cand = all_triples(kg.n_entities, kg.n_relations)
    tables = [is_true(build_capturing_model(kg, order_seed=s), cand) for s in (None, 1, 2, 3)]
    for t in tables[1:]:
        assert np.array_equal(t, tables[0])


def test_other_margins_capture_too():
    kg = parse_triples(["a\tr\tb", "b\tr\tc", "c\tr\ta"])
    for margin in (0.1, 0.5, 0.9):
        assert verify_truth_table(build_capturing_model(kg, margin=margin), kg).exact


def test_cap_and_margin_checks():
    kg = graph_from_ids(9, 8, [(0, 0, 1)])
    with pytest.raises(CapExceededError):
        build_capturing_model(kg)
    assert build_capturing_model(kg, cap=72).dim >= 72
    with pytest.raises(ValueError):
        build_capturing_model(graph_from_ids(2, 1, [(0, 0, 1)]), margin=0)


def test_empty_graph():
    kg = KnowledgeGraph([], [], np.zeros((0, 3), dtype=np.int64))
    m = build_capturing_model(kg)
    assert m.dim == 0
    assert verify_truth_table(m, kg).exact


def test_full_graph_needs_no_falsification():
    kg = graph_from_ids(3, 1, [tuple(t) for t in all_triples(3, 1).tolist()])
    m = build_capturing_model(kg)
    assert verify_truth_table(m, kg).exact and m.dim == 3
    np.testing.assert_array_equal(m.entities, base_case(3, 1).entities)


def test_report_lists_mismatches():
    kg = graph_from_ids(2, 1, [(0, 0, 1)])
    m = base_case(2, 1)
    report = verify_truth_table(m, kg)
    assert not report.exact
    assert set(report.false_positives) == {(0, 0, 0), (1, 0, 0), (1, 0, 1)}
    assert report.to_dict()["false_negatives"] == []
