"""Small generated graphs with planted inference patterns."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kg import KnowledgeGraph

RELATIONS = ("link", "next", "via", "partner", "sub_of", "super_of")


@dataclass
class PlantedGraph:
    kg: KnowledgeGraph
    inferable: set[tuple[int, int, int]]
    held_out: set[tuple[int, int, int]]
    patterns: dict[str, tuple[str, ...]]


def planted_pattern_graph(n_entities: int = 40, holdout: float = 0.2, seed: int = 0) -> PlantedGraph:
    """Graph with a symmetric relation, a hierarchy pair and a composition triple.

    Entities are split into four equal groups A, B, C and D, and D into two
    halves D1 and D2. ``link`` relates every A to every B, ``next`` every B to
    every C and ``via`` every A to every C, so ``link ; next => via``.
    ``partner`` relates distinct entities within the same half of D in both
    directions. ``sub_of`` is D1 x C and ``super_of`` is D x C, so
    ``sub_of => super_of``.

    The inferable triples are all of ``via``, all of ``partner`` and the part
    of ``super_of`` implied by ``sub_of``. A ``holdout`` fraction of them goes
    to valid and test in equal parts; the premises of every held-out triple
    stay in train.
    """
    if n_entities < 8:
        raise ValueError("need at least 8 entities")
    if not 0.0 <= holdout < 1.0:
        raise ValueError("holdout must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    q = n_entities // 4
    perm = rng.permutation(n_entities)
    a, b, c, d = perm[:q], perm[q:2 * q], perm[2 * q:3 * q], perm[3 * q:]
    d1, d2 = d[: len(d) // 2], d[len(d) // 2:]
    rel = {r: i for i, r in enumerate(RELATIONS)}

    link = {(x, rel["link"], y) for x in a for y in b}
    nxt = {(y, rel["next"], z) for y in b for z in c}
    via = {(x, rel["via"], z) for x in a for z in c}
    partner = {(x, rel["partner"], y) for half in (d1, d2) for x in half for y in half if x != y}
    sub = {(x, rel["sub_of"], z) for x in d1 for z in c}
    sup_implied = {(x, rel["super_of"], z) for x, _, z in sub}
    sup_extra = {(x, rel["super_of"], z) for x in d2 for z in c}

    inferable = sorted(via | partner | sup_implied)
    n_hold = int(round(holdout * len(inferable)))
    held: set = set()
    for idx in rng.permutation(len(inferable)):
        if len(held) >= n_hold:
            break
        h, r, t = inferable[idx]
        if r == rel["partner"] and (t, r, h) in held:
            continue  # the mirrored triple is this one's premise
        held.add((h, r, t))

    train = (link | nxt | via | partner | sub | sup_implied | sup_extra) - held
    held_list = sorted(held)
    rng.shuffle(held_list)
    half = len(held_list) // 2
    to_arr = lambda s: np.array(sorted(s), dtype=np.int64).reshape(-1, 3)
    kg = KnowledgeGraph(
        [f"e{i}" for i in range(n_entities)], list(RELATIONS),
        to_arr(train), to_arr(held_list[:half]), to_arr(held_list[half:]),
    )
    patterns = {
        "symmetry": ("partner",),
        "hierarchy": ("sub_of", "super_of"),
        "general-composition": ("link", "next", "via"),
    }
    as_tuples = lambda s: {tuple(int(v) for v in t) for t in s}
    return PlantedGraph(kg, as_tuples(inferable), as_tuples(held), patterns)
