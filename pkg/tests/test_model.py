import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expressive_kge.model import (
    ModelConfig,
    RelationEmbedding,
    Variant,
    apply_variant_constraints,
    distance,
    distance_from_residual,
    is_true,
    load_checkpoint,
    model_from_dict,
    model_to_dict,
    save_checkpoint,
    score,
    score_all_heads,
    score_all_tails,
    triple_geometry,
    triple_residual,
)

R1 = RelationEmbedding.from_values(c_h=-6, d_h=0, r_t=2, c_t=8, d_t=5, r_h=3)


def one_dim_model(relation, points):
    return ModelConfig.from_relations(np.asarray(points, dtype=float).reshape(-1, 1), [relation])


def random_model(rng, n_e=5, n_r=2, d=3, variant=Variant.BASE):
    f = lambda: rng.normal(size=(n_r, d))
    return ModelConfig(
        entities=rng.normal(size=(n_e, d)), c_h=f(), c_t=f(),
        d_h=np.abs(f()), d_t=np.abs(f()), r_h=f(), r_t=f(), variant=variant,
    )


def reference_score(model, h, r, t):
    """Scalar loop over components."""
    d = model.dim
    total = 0.0
    for j in range(d):
        parts = [
            (abs(model.entities[h, j] - model.c_h[r, j] - model.r_t[r, j] * model.entities[t, j]), model.d_h[r, j]),
            (abs(model.entities[t, j] - model.c_t[r, j] - model.r_h[r, j] * model.entities[h, j]), model.d_t[r, j]),
        ]
        for tau, width in parts:
            w = 2 * width + 1
            k = 0.5 * (w - 1) * (w - 1 / w)
            dist = tau / w if tau <= width else tau * w - k
            total += dist * dist
    return -math.sqrt(total)


def test_residual_of_table_relation():
    m = one_dim_model(R1, [-4, 1])
    assert triple_residual(m, np.array([0, 0, 1])).tolist() == [0.0, 5.0]
    assert is_true(m, np.array([0, 0, 1]))


def test_point_outside_head_band_is_false():
    m = one_dim_model(R1, [0, 2])
    assert triple_residual(m, np.array([0, 0, 1]))[0] == 2.0
    assert not is_true(m, np.array([0, 0, 1]))


def test_centered_head_residual_is_zero():
    rel = RelationEmbedding.from_values(c_h=1.5, d_h=0, r_t=7, c_t=0, d_t=0, r_h=-3)
    m = one_dim_model(rel, [1.5, 0])
    assert triple_residual(m, np.array([0, 0, 1]))[0] == 0.0


def test_zero_width_boundary_is_inclusive():
    rel = RelationEmbedding.from_values(c_h=1, d_h=0, r_t=2, c_t=-1, d_t=0, r_h=0)
    # y = -1, x = 1 + 2*(-1) = -1
    m = one_dim_model(rel, [-1, -1])
    assert is_true(m, np.array([0, 0, 1]))


def test_distance_boundary_example():
    inside = distance_from_residual(np.array([5.0]), np.array([5.0]))[0]
    just_outside = 5.0 * 11 - 0.5 * 10 * (11 - 1 / 11)
    assert inside == pytest.approx(5 / 11, abs=1e-12)
    assert just_outside == pytest.approx(5 / 11, abs=1e-12)


def test_functional_distance_is_residual():
    tau = np.array([0.0, 0.3, 2.0, 7.5])
    assert np.array_equal(distance_from_residual(tau, np.zeros(4)), tau)


def test_score_is_negative_norm():
    rel = RelationEmbedding.from_values(c_h=0, d_h=0, r_t=0, c_t=0, d_t=0, r_h=0)
    m = one_dim_model(rel, [3, 4])
    assert score(m, np.array([0, 0, 1])) == -5.0
    assert score(one_dim_model(rel, [0, 0]), np.array([0, 0, 1])) == 0.0


def test_scores_match_scalar_reference():
    rng = np.random.default_rng(7)
    m = random_model(rng)
    triples = np.array([[h, r, t] for h in range(5) for r in range(2) for t in range(5)])
    got = score(m, triples)
    want = [reference_score(m, h, r, t) for h, r, t in triples]
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(score_all_tails(m, 2, 1), [reference_score(m, 2, 1, t) for t in range(5)], rtol=1e-12)
    np.testing.assert_allclose(score_all_heads(m, 0, 3), [reference_score(m, h, 0, 3) for h in range(5)], rtol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 50), st.floats(0, 100), st.floats(0, 100))
def test_distance_monotone_in_residual(width, a, b):
    lo, hi = sorted((a, b))
    d = distance_from_residual(np.array([lo, hi]), np.array([width, width]))
    assert d[0] <= d[1] + 1e-9 * max(1.0, d[1])


def test_true_triples_have_bounded_distance():
    rng = np.random.default_rng(3)
    for _ in range(50):
        m = random_model(rng, d=4)
        m.d_h[:] += 2.0
        m.d_t[:] += 2.0
        triples = np.array([[h, r, t] for h in range(5) for r in range(2) for t in range(5)])
        mask = is_true(m, triples)
        if not mask.any():
            continue
        dist = distance(m, triples[mask])
        widths = np.concatenate([m.d_h[triples[mask, 1]], m.d_t[triples[mask, 1]]], axis=1)
        assert np.all(dist <= widths / (2 * widths + 1) + 1e-12)


def test_appending_a_centered_dimension_leaves_score_unchanged():
    rng = np.random.default_rng(11)
    m = random_model(rng, n_e=2, n_r=1, d=2)
    before = score(m, np.array([0, 0, 1]))
    eh, et = 0.4, -0.2
    grow = lambda a, v: np.hstack([a, np.full((a.shape[0], 1), v)])
    m2 = ModelConfig(
        entities=np.hstack([m.entities, [[eh], [et]]]),
        c_h=grow(m.c_h, eh - 0.5 * et), c_t=grow(m.c_t, et - 2.0 * eh),
        d_h=grow(m.d_h, 0.3), d_t=grow(m.d_t, 0.1), r_h=grow(m.r_h, 2.0), r_t=grow(m.r_t, 0.5),
    )
    assert score(m2, np.array([0, 0, 1])) == pytest.approx(before, abs=1e-15)


def test_variant_constraints():
    rng = np.random.default_rng(5)
    m = random_model(rng, n_r=3)
    f = apply_variant_constraints(m, "Functional")
    assert np.all(f.d_h == 0) and np.all(f.d_t == 0)
    n = apply_variant_constraints(m, Variant.NO_CENTER)
    assert np.all(n.c_h == 0) and np.all(n.c_t == 0)
    e = apply_variant_constraints(m, "eqslopes")
    assert np.all(e.r_h == e.r_h[0]) and np.all(e.r_t == e.r_t[0])
    with pytest.raises(ValueError):
        apply_variant_constraints(m, "Boxy")


def test_one_band_ignores_tail_band():
    rng = np.random.default_rng(9)
    m = random_model(rng, variant=Variant.ONE_BAND)
    triples = np.array([[0, 0, 1], [2, 1, 3]])
    before = score(m, triples)
    m.c_t += 10.0
    m.r_h -= 3.0
    m.d_t[:] = 0.0
    np.testing.assert_array_equal(score(m, triples), before)
    m.d_h[:] = 1e6
    assert is_true(m, triples).all()


def test_triple_geometry_fields():
    m = one_dim_model(R1, [-4, 1])
    g = triple_geometry(m, np.array([0, 0, 1]))
    assert g.inside.tolist() == [True, True]
    assert g.score == -float(np.linalg.norm(g.distance))


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    m = random_model(rng, variant=Variant.EQ_SLOPES)
    path = save_checkpoint(m, tmp_path / "m.json")
    back = load_checkpoint(path)
    assert back.variant is Variant.EQ_SLOPES
    for f in ("entities", "c_h", "c_t", "d_h", "d_t", "r_h", "r_t"):
        np.testing.assert_array_equal(getattr(back, f), getattr(m, f))
    assert save_checkpoint(back, tmp_path / "n.json").read_bytes() == path.read_bytes()


def test_checkpoint_rejects_unknown_version():
    doc = model_to_dict(one_dim_model(R1, [0, 0]))
    doc["format_version"] = 99
    with pytest.raises(ValueError):
        model_from_dict(doc)


def test_negative_width_rejected():
    with pytest.raises(ValueError):
        RelationEmbedding.from_values(0, -1, 0, 0, 0, 0)
