"""Relation band parameters, truth test, triple residuals, distance and score.

An entity is a point ``e`` in ``R^d``. A relation carries six length-``d``
vectors: centers ``c_h, c_t``, widths ``d_h, d_t`` and slopes ``r_h, r_t``.
A triple ``r(h, t)`` is true when, in every dimension,

    |e_h - c_h - r_t * e_t| <= d_h   and   |e_t - c_t - r_h * e_h| <= d_t

i.e. the pair ``(e_h[j], e_t[j])`` lies in the parallelogram cut out by a
head band and a tail band.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
RELATION_FIELDS = ("c_h", "c_t", "d_h", "d_t", "r_h", "r_t")


class Variant(str, Enum):
    BASE = "Base"
    FUNCTIONAL = "Functional"
    EQ_SLOPES = "EqSlopes"
    NO_CENTER = "NoCenter"
    ONE_BAND = "OneBand"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        for v in cls:
            if v.value.lower() == str(value).lower():
                return v
        raise ValueError(f"unknown variant {value!r}; expected one of {[v.value for v in cls]}")


@dataclass(frozen=True)
class RelationEmbedding:
    c_h: np.ndarray
    c_t: np.ndarray
    d_h: np.ndarray
    d_t: np.ndarray
    r_h: np.ndarray
    r_t: np.ndarray

    def __post_init__(self):
        dims = {np.shape(getattr(self, f)) for f in RELATION_FIELDS}
        if len(dims) != 1:
            raise ValueError(f"relation vectors must share one length, got {dims}")
        if np.any(np.asarray(self.d_h) < 0) or np.any(np.asarray(self.d_t) < 0):
            raise ValueError("widths must be non-negative")

    @property
    def dim(self) -> int:
        return len(self.c_h)

    @classmethod
    def from_values(cls, c_h, d_h, r_t, c_t, d_t, r_h) -> "RelationEmbedding":
        """Build from scalars or sequences in the column order of the fixture tables."""
        arr = lambda v: np.atleast_1d(np.asarray(v, dtype=float))
        return cls(c_h=arr(c_h), c_t=arr(c_t), d_h=arr(d_h), d_t=arr(d_t), r_h=arr(r_h), r_t=arr(r_t))


@dataclass
class ModelConfig:
    """Embedding state: entity points plus six ``(n_relations, dim)`` relation arrays."""

    entities: np.ndarray
    c_h: np.ndarray
    c_t: np.ndarray
    d_h: np.ndarray
    d_t: np.ndarray
    r_h: np.ndarray
    r_t: np.ndarray
    variant: Variant = Variant.BASE
    entity_ids: list[str] | None = None
    relation_ids: list[str] | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.variant = Variant.parse(self.variant)
        self.entities = np.atleast_2d(np.asarray(self.entities, dtype=float))
        for f in RELATION_FIELDS:
            setattr(self, f, np.atleast_2d(np.asarray(getattr(self, f), dtype=float)))
        d = self.entities.shape[1]
        shapes = {getattr(self, f).shape for f in RELATION_FIELDS}
        if len(shapes) != 1:
            raise ValueError(f"relation arrays disagree in shape: {shapes}")
        (shape,) = shapes
        if shape[1] != d:
            raise ValueError(f"relation dim {shape[1]} != entity dim {d}")
        if self.entity_ids is not None and len(self.entity_ids) != len(self.entities):
            raise ValueError("entity_ids length does not match entity embeddings")
        if self.relation_ids is not None and len(self.relation_ids) != shape[0]:
            raise ValueError("relation_ids length does not match relation embeddings")

    @property
    def dim(self) -> int:
        return self.entities.shape[1]

    @property
    def n_entities(self) -> int:
        return self.entities.shape[0]

    @property
    def n_relations(self) -> int:
        return self.c_h.shape[0]

    def relation(self, i: int) -> RelationEmbedding:
        return RelationEmbedding(**{f: getattr(self, f)[i].copy() for f in RELATION_FIELDS})

    def relation_position(self, name_or_index) -> int:
        if isinstance(name_or_index, (int, np.integer)):
            return int(name_or_index)
        if self.relation_ids is None:
            raise KeyError(name_or_index)
        return self.relation_ids.index(name_or_index)

    def copy(self) -> "ModelConfig":
        return replace(
            self,
            entities=self.entities.copy(),
            **{f: getattr(self, f).copy() for f in RELATION_FIELDS},
            entity_ids=None if self.entity_ids is None else list(self.entity_ids),
            relation_ids=None if self.relation_ids is None else list(self.relation_ids),
            extra=dict(self.extra),
        )

    @classmethod
    def from_relations(cls, entities, relations, variant=Variant.BASE, entity_ids=None, relation_ids=None):
        stacked = {f: np.stack([getattr(r, f) for r in relations]) for f in RELATION_FIELDS}
        return cls(entities=entities, variant=variant, entity_ids=entity_ids, relation_ids=relation_ids, **stacked)

    def bound_to(self, kg) -> bool:
        """True if counts (and ids, when stored) match the graph vocabularies."""
        if self.n_entities != kg.n_entities or self.n_relations != kg.n_relations:
            return False
        if self.entity_ids is not None and list(self.entity_ids) != list(kg.entities):
            return False
        if self.relation_ids is not None and list(self.relation_ids) != list(kg.relations):
            return False
        return True


# ---------------------------------------------------------------------------
# scoring


def _gather(model: ModelConfig, triples):
    triples = np.asarray(triples, dtype=np.int64)
    single = triples.ndim == 1
    triples = np.atleast_2d(triples)
    if triples.shape[1] != 3:
        raise ValueError(f"triples must have 3 columns, got shape {triples.shape}")
    h, r, t = triples.T
    return single, model.entities[h], model.entities[t], r


def residual_parts(model: ModelConfig, triples):
    """Signed residuals ``(u_head, u_tail)`` of shape ``(n, d)`` each."""
    single, eh, et, r = _gather(model, triples)
    u_h = eh - model.c_h[r] - model.r_t[r] * et
    u_t = et - model.c_t[r] - model.r_h[r] * eh
    return u_h, u_t


def triple_residual(model: ModelConfig, triples) -> np.ndarray:
    """``tau = |e_ht - c_ht - r_th * e_th|`` as a length-``2d`` vector (or ``(n, 2d)``)."""
    u_h, u_t = residual_parts(model, triples)
    tau = np.abs(np.concatenate([u_h, u_t], axis=1))
    return tau[0] if np.asarray(triples).ndim == 1 else tau


def _widths(model: ModelConfig, r) -> np.ndarray:
    return np.concatenate([model.d_h[r], model.d_t[r]], axis=1)


def _active_mask(model: ModelConfig) -> np.ndarray:
    d = model.dim
    mask = np.ones(2 * d, dtype=bool)
    if model.variant is Variant.ONE_BAND:
        mask[d:] = False
    return mask


def is_true(model: ModelConfig, triples):
    """Elementwise (non-strict) containment of the triple in the relation's region."""
    single = np.asarray(triples).ndim == 1
    tau = np.atleast_2d(triple_residual(model, triples))
    r = np.atleast_2d(np.asarray(triples))[:, 1]
    ok = tau <= _widths(model, r)
    out = ok[:, _active_mask(model)].all(axis=1)
    return bool(out[0]) if single else out


def distance_from_residual(tau, width):
    """Piecewise distance applied componentwise.

    Inside a band (``tau <= width``) the residual is divided by
    ``w = 2 * width + 1``; outside it is scaled by ``w`` and shifted by
    ``k = 0.5 * (w - 1) * (w - 1 / w)``, which makes both branches meet at
    ``tau == width``.
    """
    tau = np.asarray(tau, dtype=float)
    w = 2.0 * np.asarray(width, dtype=float) + 1.0
    k = 0.5 * (w - 1.0) * (w - 1.0 / w)
    return np.where(tau <= width, tau / w, tau * w - k)


def distance(model: ModelConfig, triples) -> np.ndarray:
    single = np.asarray(triples).ndim == 1
    tau = np.atleast_2d(triple_residual(model, triples))
    r = np.atleast_2d(np.asarray(triples))[:, 1]
    dist = distance_from_residual(tau, _widths(model, r))
    dist[:, ~_active_mask(model)] = 0.0
    return dist[0] if single else dist


def score(model: ModelConfig, triples):
    """``-||distance||_2``; zero only when the pair sits on every center line."""
    single = np.asarray(triples).ndim == 1
    dist = np.atleast_2d(distance(model, triples))
    s = -np.linalg.norm(dist, axis=1)
    return float(s[0]) if single else s


@dataclass
class TripleGeometryResult:
    tau: np.ndarray
    inside: np.ndarray
    distance: np.ndarray
    score: float


def triple_geometry(model: ModelConfig, triple) -> TripleGeometryResult:
    tau = triple_residual(model, triple)
    widths = np.concatenate([model.d_h[triple[1]], model.d_t[triple[1]]])
    return TripleGeometryResult(
        tau=tau, inside=tau <= widths, distance=distance(model, triple), score=score(model, triple)
    )


def score_all_tails(model: ModelConfig, head: int, relation: int) -> np.ndarray:
    """Scores of ``relation(head, e)`` for every entity ``e``."""
    n = model.n_entities
    triples = np.column_stack([np.full(n, head), np.full(n, relation), np.arange(n)])
    return score(model, triples)


def score_all_heads(model: ModelConfig, relation: int, tail: int) -> np.ndarray:
    n = model.n_entities
    triples = np.column_stack([np.arange(n), np.full(n, relation), np.full(n, tail)])
    return score(model, triples)


# ---------------------------------------------------------------------------
# variants


def apply_variant_constraints(model: ModelConfig, variant=None) -> ModelConfig:
    """Return a copy whose parameters satisfy the structural constraints of ``variant``.

    Functional zeroes the widths, NoCenter zeroes the centers and EqSlopes
    replaces every relation's slopes by the across-relation mean. OneBand
    keeps the tail-band arrays but they are ignored by scoring.
    """
    variant = Variant.parse(variant if variant is not None else model.variant)
    out = model.copy()
    out.variant = variant
    if variant is Variant.FUNCTIONAL:
        out.d_h[:] = 0.0
        out.d_t[:] = 0.0
    elif variant is Variant.NO_CENTER:
        out.c_h[:] = 0.0
        out.c_t[:] = 0.0
    elif variant is Variant.EQ_SLOPES:
        out.r_h[:] = out.r_h.mean(axis=0, keepdims=True)
        out.r_t[:] = out.r_t.mean(axis=0, keepdims=True)
    return out


# ---------------------------------------------------------------------------
# checkpoints


def model_to_dict(model: ModelConfig) -> dict:
    n_e, n_r = model.n_entities, model.n_relations
    return {
        "format_version": FORMAT_VERSION,
        "dim": model.dim,
        "variant": model.variant.value,
        "entity_ids": list(model.entity_ids) if model.entity_ids is not None else [f"e{i}" for i in range(n_e)],
        "relation_ids": list(model.relation_ids) if model.relation_ids is not None else [f"r{i}" for i in range(n_r)],
        "entities": model.entities.tolist(),
        "relations": [{f: getattr(model, f)[i].tolist() for f in RELATION_FIELDS} for i in range(n_r)],
    }


def model_from_dict(doc: dict) -> ModelConfig:
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version {doc.get('format_version')!r}")
    dim = int(doc["dim"])
    rels = doc["relations"]
    entities = np.asarray(doc["entities"], dtype=float).reshape(-1, dim)
    arrays = {f: np.asarray([r[f] for r in rels], dtype=float).reshape(-1, dim) for f in RELATION_FIELDS}
    return ModelConfig(
        entities=entities,
        variant=doc.get("variant", "Base"),
        entity_ids=list(doc["entity_ids"]),
        relation_ids=list(doc["relation_ids"]),
        **arrays,
    )


def save_checkpoint(model: ModelConfig, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")
    return path


def load_checkpoint(path) -> ModelConfig:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
