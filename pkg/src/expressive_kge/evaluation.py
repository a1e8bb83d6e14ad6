"""Filtered link-prediction ranking and stratified reports."""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .kg import FilterIndex, KnowledgeGraph, build_filter_index, cardinality_classes
from .model import ModelConfig, score_all_heads, score_all_tails

HITS_K = (1, 3, 10)
SIDES = ("head", "tail")


def build_evaluation_filter(kg: KnowledgeGraph) -> FilterIndex:
    """Known triples of all splits."""
    return build_filter_index(kg)


def tie_rank(n_greater: int, n_tied_others: int) -> int:
    """Mean of the optimistic and pessimistic ranks, rounded half up."""
    optimistic = 1 + n_greater
    pessimistic = 1 + n_greater + n_tied_others
    return int(math.floor((optimistic + pessimistic) / 2 + 0.5))


def rank_from_scores(scores: np.ndarray, gold: int, filtered=()) -> int:
    """Rank of ``scores[gold]`` after dropping ``filtered`` candidates (never the gold one).

    Ties are detected with exact float equality.
    """
    keep = np.ones(len(scores), dtype=bool)
    drop = [c for c in filtered if c != gold]
    if drop:
        keep[drop] = False
    keep[gold] = False
    target = scores[gold]
    rest = scores[keep]
    return tie_rank(int(np.count_nonzero(rest > target)), int(np.count_nonzero(rest == target)))


def rank_triple(model: ModelConfig, kg: KnowledgeGraph, flt: FilterIndex | None, triple, side: str) -> int:
    h, r, t = (int(v) for v in triple)
    if side == "tail":
        scores = score_all_tails(model, h, r)
        known = flt.tails(r, h) if flt is not None else ()
        return rank_from_scores(scores, t, known)
    if side == "head":
        scores = score_all_heads(model, r, t)
        known = flt.heads(r, t) if flt is not None else ()
        return rank_from_scores(scores, h, known)
    raise ValueError(f"side must be 'head' or 'tail', not {side!r}")


@dataclass
class RankingReport:
    mrr: float
    hits_at: dict[int, float]
    per_relation: dict[str, float] = field(default_factory=dict)
    per_cardinality: dict[tuple[str, str], float] = field(default_factory=dict)
    n_queries: int = 0
    ranks: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "mrr": self.mrr,
            "hits_at": {str(k): v for k, v in self.hits_at.items()},
            "per_relation": dict(self.per_relation),
            "per_cardinality": {f"{c}/{s}": v for (c, s), v in self.per_cardinality.items()},
            "n_queries": self.n_queries,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_table(self) -> str:
        lines = [f"queries  {self.n_queries}", f"MRR      {self.mrr:.4f}"]
        lines += [f"Hits@{k:<3} {v:.4f}" for k, v in self.hits_at.items()]
        if self.per_relation:
            width = max(len(r) for r in self.per_relation)
            lines += ["", f"{'relation':<{width}}  MRR"]
            lines += [f"{r:<{width}}  {v:.4f}" for r, v in self.per_relation.items()]
        if self.per_cardinality:
            lines += ["", "class   side  MRR"]
            lines += [f"{c:<7} {s:<5} {v:.4f}" for (c, s), v in self.per_cardinality.items()]
        return "\n".join(lines)


def _summary(ranks: np.ndarray) -> tuple[float, dict[int, float]]:
    ranks = np.asarray(ranks, dtype=float)
    return float(np.mean(1.0 / ranks)), {k: float(np.mean(ranks <= k)) for k in HITS_K}


def evaluate(model: ModelConfig, kg: KnowledgeGraph, flt: FilterIndex | None = None,
             split: str = "test", triples=None) -> RankingReport:
    """Filtered head- and tail-side ranking of every triple in ``split`` (or ``triples``).

    Per-relation MRR averages both sides. Cardinality strata use the classes
    computed from the train split; relations without train triples are
    grouped under ``"Undefined"``.
    """
    if flt is None:
        flt = build_evaluation_filter(kg)
    triples = kg.split(split) if triples is None else np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if len(triples) == 0:
        raise ValueError("nothing to evaluate: the triple set is empty")
    head = np.array([rank_triple(model, kg, flt, tr, "head") for tr in triples])
    tail = np.array([rank_triple(model, kg, flt, tr, "tail") for tr in triples])
    mrr, hits = _summary(np.concatenate([head, tail]))

    classes = cardinality_classes(kg)
    by_rel: dict[int, list[float]] = defaultdict(list)
    by_card: dict[tuple[str, str], list[float]] = defaultdict(list)
    for (_, r, _), hr, tr in zip(triples.tolist(), head, tail):
        by_rel[r] += [1.0 / hr, 1.0 / tr]
        tag = classes[r].tag if r in classes else "Undefined"
        by_card[(tag, "head")].append(1.0 / hr)
        by_card[(tag, "tail")].append(1.0 / tr)
    per_relation = {kg.relations[r]: float(np.mean(v)) for r, v in sorted(by_rel.items())}
    per_card = {key: float(np.mean(by_card[key])) for key in sorted(by_card)}
    return RankingReport(mrr, hits, per_relation, per_card, 2 * len(triples), {"head": head, "tail": tail})


def random_ranking_mrr(n_candidates: int) -> float:
    """Expected reciprocal rank when the gold candidate lands uniformly among ``n_candidates``."""
    return float(np.mean(1.0 / np.arange(1, n_candidates + 1)))
