"""Constructive capture of an arbitrary small graph.

Start from a model in which every triple is true, then falsify each absent
triple ``r_i(e_j, e_k)`` (``j != k``) inside its own dimension ``(i, k)``, and
finally append one dimension per absent self-loop. Parameters are unbounded
here: the tanh reparameterization of training does not apply.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kg import KnowledgeGraph
from .model import ModelConfig, Variant, is_true

DEFAULT_MARGIN = 0.5
DEFAULT_CAP = 64
SLACK_FACTOR = 1.01


class CapExceededError(ValueError):
    pass


class SelfLoopError(ValueError):
    pass


class AssumptionViolation(AssertionError):
    pass


def dim_index(i: int, k: int, n_entities: int) -> int:
    return i * n_entities + k


def base_case(n_entities: int, n_relations: int, entity_ids=None, relation_ids=None) -> ModelConfig:
    """Model with one dimension per (relation, entity) pair that makes every triple true."""
    if n_entities < 1 or n_relations < 1:
        raise ValueError("need at least one entity and one relation")
    d = n_entities * n_relations
    entities = np.ones((n_entities, d))
    for i in range(n_relations):
        for k in range(n_entities):
            entities[k, dim_index(i, k, n_entities)] = 2.0
    shape = (n_relations, d)
    return ModelConfig(
        entities=entities,
        c_h=np.zeros(shape), c_t=np.zeros(shape),
        d_h=np.full(shape, 4.0), d_t=np.full(shape, 4.0),
        r_h=np.ones(shape), r_t=np.full(shape, 2.0),
        variant=Variant.BASE, entity_ids=entity_ids, relation_ids=relation_ids,
        extra={"core_dim": d},
    )


def audit_assumptions(model: ModelConfig, margin: float, core_dim: int | None = None) -> None:
    """Raise ``AssumptionViolation`` unless slopes and entities are positive and each
    dimension ``(i, k)`` is dominated by entity ``k`` with separation ``margin``."""
    n_e = model.n_entities
    core = model.extra.get("core_dim", model.dim) if core_dim is None else core_dim
    ent = model.entities[:, :core]
    if np.any(model.r_h[:, :core] <= 0) or np.any(model.r_t[:, :core] <= 0):
        raise AssumptionViolation("a slope is not positive")
    if np.any(ent <= 0):
        raise AssumptionViolation("an entity embedding is not positive")
    if n_e < 2:
        return
    for v in range(core):
        k = v % n_e
        others = np.delete(ent[:, v], k)
        gap = ent[k, v] - others.max()
        if gap < margin * (1 - 1e-12):
            raise AssumptionViolation(f"dimension {v}: dominance gap {gap:.6g} < margin {margin}")


def falsify_triple(model: ModelConfig, i: int, j: int, k: int, margin: float = DEFAULT_MARGIN,
                   audit: bool = True) -> ModelConfig:
    """Make ``r_i(e_j, e_k)`` false while preserving the truth value of every other triple.

    Works in dimension ``v = (i, k)``, where ``e_k`` dominates. Raising relation
    ``i``'s tail slope by ``delta`` and shifting ``e_j`` by ``delta*(e_k - m)``
    and every other entity by ``delta*e_k`` pushes exactly the pair
    ``(e_j, e_k)`` below the head band; the band updates below widen every
    other band just enough to absorb the shifts. Mutates and returns ``model``.
    """
    if j == k:
        raise SelfLoopError("self-loops are excluded with add_self_loop_exclusions")
    n_e = model.n_entities
    v = dim_index(i, k, n_e)
    e = model.entities
    triple = np.array([j, i, k])
    if not is_true(model, triple):
        raise ValueError(f"triple r{i}(e{j}, e{k}) is already false")

    need = e[j, v] - model.r_t[i, v] * e[k, v] - model.c_h[i, v] + model.d_h[i, v]
    if need <= 0:
        need = margin * 1e-6
    delta = SLACK_FACTOR * need / margin
    shift_max = delta * e[k, v]
    shift_ub = delta * (e[k, v] - margin)
    dm = delta * margin

    # head bands of the other relations
    for i2 in range(model.n_relations):
        if i2 == i:
            continue
        s = model.r_t[i2, v] * dm + shift_max
        model.d_h[i2, v] += s / 2
        model.c_h[i2, v] += -model.r_t[i2, v] * shift_max + s / 2
    # tail bands of every relation
    s = model.r_h[:, v] * dm + shift_max
    model.d_t[:, v] += s / 2
    model.c_t[:, v] += -model.r_h[:, v] * shift_max + s / 2
    # head band of relation i, using its slope before the increase
    r_t = model.r_t[i, v]
    s = (delta + r_t) * dm + shift_max
    model.d_h[i, v] += s / 2
    model.c_h[i, v] += -delta * shift_max - r_t * shift_max + s / 2
    model.r_t[i, v] = r_t + delta

    e[:, v] += shift_max
    e[j, v] += shift_ub - shift_max

    if audit:
        audit_assumptions(model, margin)
    return model


def add_self_loop_exclusions(model: ModelConfig, loops) -> ModelConfig:
    """Append one dimension per ``(relation, entity)`` self-loop to exclude.

    In that dimension the entity sits at 2 and all others at 1; the relation's
    head band admits ``x + y`` in ``[2, 3]``, which rejects only ``(2, 2)``.
    Every other band covers everything.
    """
    loops = list(dict.fromkeys((int(i), int(j)) for i, j in loops))
    if not loops:
        return model
    n_e, n_r = model.n_entities, model.n_relations
    n_new = len(loops)
    ent = np.ones((n_e, n_new))
    c_h, c_t = np.zeros((n_r, n_new)), np.zeros((n_r, n_new))
    d_h, d_t = np.full((n_r, n_new), 100.0), np.full((n_r, n_new), 100.0)
    r_h, r_t = np.zeros((n_r, n_new)), np.zeros((n_r, n_new))
    for col, (i, j) in enumerate(loops):
        ent[j, col] = 2.0
        c_h[i, col], d_h[i, col], r_t[i, col] = 2.5, 0.5, -1.0
    out = ModelConfig(
        entities=np.hstack([model.entities, ent]),
        c_h=np.hstack([model.c_h, c_h]), c_t=np.hstack([model.c_t, c_t]),
        d_h=np.hstack([model.d_h, d_h]), d_t=np.hstack([model.d_t, d_t]),
        r_h=np.hstack([model.r_h, r_h]), r_t=np.hstack([model.r_t, r_t]),
        variant=model.variant, entity_ids=model.entity_ids, relation_ids=model.relation_ids,
        extra=dict(model.extra),
    )
    out.extra["self_loop_dims"] = out.extra.get("self_loop_dims", []) + [list(p) for p in loops]
    return out


def all_triples(n_entities: int, n_relations: int) -> np.ndarray:
    h, r, t = np.meshgrid(np.arange(n_entities), np.arange(n_relations), np.arange(n_entities), indexing="ij")
    return np.column_stack([h.ravel(), r.ravel(), t.ravel()])


def build_capturing_model(kg: KnowledgeGraph, margin: float = DEFAULT_MARGIN, cap: int = DEFAULT_CAP,
                          order_seed: int | None = None) -> ModelConfig:
    """Model whose true triples are exactly the triples of ``kg`` (all splits).

    ``order_seed`` shuffles the falsification order; the truth table does not
    depend on it.
    """
    n_e, n_r = kg.n_entities, kg.n_relations
    if n_e * n_r > cap:
        raise CapExceededError(f"|E|*|R| = {n_e * n_r} exceeds the cap {cap}")
    if margin <= 0:
        raise ValueError("margin must be positive")
    if n_e == 0 or n_r == 0:
        # no triple can be formed, so there is nothing to make true or false
        return ModelConfig(entities=np.zeros((n_e, 0)), c_h=np.zeros((n_r, 0)), c_t=np.zeros((n_r, 0)),
                           d_h=np.zeros((n_r, 0)), d_t=np.zeros((n_r, 0)), r_h=np.zeros((n_r, 0)),
                           r_t=np.zeros((n_r, 0)), entity_ids=list(kg.entities), relation_ids=list(kg.relations))
    model = base_case(n_e, n_r, list(kg.entities), list(kg.relations))
    present = kg.triple_set("train") | kg.triple_set("valid") | kg.triple_set("test")
    absent = [tuple(x) for x in all_triples(n_e, n_r).tolist() if tuple(x) not in present]
    if order_seed is not None:
        perm = np.random.default_rng(order_seed).permutation(len(absent))
        absent = [absent[p] for p in perm]
    loops = []
    for h, r, t in absent:
        if h == t:
            loops.append((r, h))
        else:
            falsify_triple(model, r, h, t, margin)
    return add_self_loop_exclusions(model, loops)


@dataclass
class VerificationReport:
    exact: bool
    n_triples: int
    dim: int
    false_positives: list = field(default_factory=list)
    false_negatives: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "exact": self.exact,
            "n_triples": self.n_triples,
            "dim": self.dim,
            "false_positives": [list(map(int, t)) for t in self.false_positives],
            "false_negatives": [list(map(int, t)) for t in self.false_negatives],
        }


def verify_truth_table(model: ModelConfig, kg: KnowledgeGraph) -> VerificationReport:
    """Exhaustive comparison of ``is_true`` with membership in ``kg``."""
    cand = all_triples(kg.n_entities, kg.n_relations)
    present = kg.triple_set("train") | kg.triple_set("valid") | kg.triple_set("test")
    truth = np.array([tuple(x) in present for x in cand.tolist()], dtype=bool)
    pred = is_true(model, cand)
    fp = [tuple(x) for x in cand[pred & ~truth].tolist()]
    fn = [tuple(x) for x in cand[~pred & truth].tolist()]
    return VerificationReport(not fp and not fn, len(cand), model.dim, fp, fn)
