"""Triple vocabularies, dataset ingestion, filter indices and graph analytics."""
from __future__ import annotations

import re
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

SPLITS = ("train", "valid", "test")


class ParseError(ValueError):
    """Malformed line in a triple or pattern file."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class SplitOverlapError(ValueError):
    pass


class UndefinedCardinalityError(ValueError):
    pass


class UndefinedCoverageError(ValueError):
    pass


def _empty_triples() -> np.ndarray:
    return np.zeros((0, 3), dtype=np.int64)


@dataclass
class KnowledgeGraph:
    """Entity/relation vocabularies plus train/valid/test triple arrays.

    Triples are stored as ``(n, 3)`` integer arrays with columns
    ``(head, relation, tail)``.
    """

    entities: list[str]
    relations: list[str]
    train: np.ndarray = field(default_factory=_empty_triples)
    valid: np.ndarray = field(default_factory=_empty_triples)
    test: np.ndarray = field(default_factory=_empty_triples)

    def __post_init__(self):
        self.train = np.asarray(self.train, dtype=np.int64).reshape(-1, 3)
        self.valid = np.asarray(self.valid, dtype=np.int64).reshape(-1, 3)
        self.test = np.asarray(self.test, dtype=np.int64).reshape(-1, 3)
        self.entity_index = {e: i for i, e in enumerate(self.entities)}
        self.relation_index = {r: i for i, r in enumerate(self.relations)}
        self.validate()

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    def split(self, name: str) -> np.ndarray:
        if name not in SPLITS:
            raise KeyError(name)
        return getattr(self, name)

    def all_triples(self) -> np.ndarray:
        return np.concatenate([self.train, self.valid, self.test], axis=0)

    def triple_set(self, name: str = "train") -> set[tuple[int, int, int]]:
        return {tuple(int(v) for v in row) for row in self.split(name)}

    def validate(self) -> None:
        if len(self.entity_index) != len(self.entities):
            raise ValueError("duplicate entity identifiers in vocabulary")
        if len(self.relation_index) != len(self.relations):
            raise ValueError("duplicate relation identifiers in vocabulary")
        for name in SPLITS:
            arr = self.split(name)
            if len(arr) == 0:
                continue
            if arr.min() < 0 or arr[:, [0, 2]].max() >= self.n_entities or arr[:, 1].max() >= self.n_relations:
                raise ValueError(f"{name} split has indices outside the vocabularies")
        sets = {name: self.triple_set(name) for name in SPLITS}
        for a, b in (("train", "valid"), ("train", "test"), ("valid", "test")):
            common = sets[a] & sets[b]
            if common:
                h, r, t = sorted(common)[0]
                raise SplitOverlapError(
                    f"{len(common)} triple(s) shared by {a} and {b}, e.g. "
                    f"{self.entities[h]}\t{self.relations[r]}\t{self.entities[t]}"
                )

    def label(self, triple) -> str:
        h, r, t = (int(v) for v in triple)
        return f"{self.relations[r]}({self.entities[h]},{self.entities[t]})"

    def to_lines(self, name: str) -> list[str]:
        return [
            f"{self.entities[h]}\t{self.relations[r]}\t{self.entities[t]}"
            for h, r, t in self.split(name)
        ]


def read_triple_lines(lines: Iterable[str], source: str = "<stream>") -> list[tuple[str, str, str]]:
    """Parse ``head<TAB>relation<TAB>tail`` lines; blank lines are skipped."""
    out = []
    seen = set()
    n_dupes = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(f"{source}: expected 3 tab-separated fields, got {len(fields)}", lineno)
        triple = tuple(f.strip() for f in fields)
        if triple in seen:
            n_dupes += 1
            continue
        seen.add(triple)
        out.append(triple)
    if n_dupes:
        warnings.warn(f"{source}: dropped {n_dupes} duplicate triple(s)", stacklevel=2)
    return out


def parse_triples(
    train: Iterable[str],
    valid: Iterable[str] = (),
    test: Iterable[str] = (),
    entities: Sequence[str] | None = None,
    relations: Sequence[str] | None = None,
) -> KnowledgeGraph:
    """Build a :class:`KnowledgeGraph` from line iterables of the three splits.

    Vocabularies are assigned in first-appearance order over train, then
    valid, then test. Pre-existing vocabularies (e.g. from a checkpoint) can
    be passed in and are extended in the same order.
    """
    ent = list(entities) if entities is not None else []
    rel = list(relations) if relations is not None else []
    ent_idx = {e: i for i, e in enumerate(ent)}
    rel_idx = {r: i for i, r in enumerate(rel)}
    arrays = {}
    for name, lines in zip(SPLITS, (train, valid, test)):
        rows = []
        for h, r, t in read_triple_lines(lines, source=name):
            for e in (h, t):
                if e not in ent_idx:
                    ent_idx[e] = len(ent)
                    ent.append(e)
            if r not in rel_idx:
                rel_idx[r] = len(rel)
                rel.append(r)
            rows.append((ent_idx[h], rel_idx[r], ent_idx[t]))
        arrays[name] = np.array(rows, dtype=np.int64).reshape(-1, 3)
    return KnowledgeGraph(ent, rel, arrays["train"], arrays["valid"], arrays["test"])


def _find_split_file(directory: Path, name: str) -> Path | None:
    for ext in (".txt", ".tsv", ""):
        p = directory / f"{name}{ext}"
        if p.is_file():
            return p
    return None


def load_dataset(directory, entities=None, relations=None) -> KnowledgeGraph:
    """Load ``train``/``valid``/``test`` files (``.txt`` or ``.tsv``) from a directory.

    Only the train file is required.
    """
    directory = Path(directory)
    texts = []
    for name in SPLITS:
        path = _find_split_file(directory, name)
        if path is None:
            if name == "train":
                raise FileNotFoundError(f"no train file in {directory}")
            texts.append([])
        else:
            texts.append(path.read_text(encoding="utf-8").splitlines())
    return parse_triples(*texts, entities=entities, relations=relations)


# ---------------------------------------------------------------------------
# filter index


@dataclass
class FilterIndex:
    known_heads: dict[tuple[int, int], set[int]]
    known_tails: dict[tuple[int, int], set[int]]

    def heads(self, relation: int, tail: int) -> set[int]:
        return self.known_heads.get((relation, tail), set())

    def tails(self, relation: int, head: int) -> set[int]:
        return self.known_tails.get((relation, head), set())

    def contains(self, triple) -> bool:
        h, r, t = (int(v) for v in triple)
        return t in self.known_tails.get((r, h), ())


def build_filter_index(kg: KnowledgeGraph) -> FilterIndex:
    heads: dict[tuple[int, int], set[int]] = defaultdict(set)
    tails: dict[tuple[int, int], set[int]] = defaultdict(set)
    for h, r, t in kg.all_triples().tolist():
        heads[(r, t)].add(h)
        tails[(r, h)].add(t)
    return FilterIndex(dict(heads), dict(tails))


# ---------------------------------------------------------------------------
# cardinality classes

CARDINALITY_TAGS = ("OneOne", "OneN", "NOne", "NN")
CARDINALITY_THRESHOLD = 1.5


@dataclass(frozen=True)
class CardinalityClass:
    tag: str
    mu_rt: float
    mu_rh: float


def classify_relation_cardinality(kg: KnowledgeGraph, relation) -> CardinalityClass:
    """Classify a relation as 1-1 / 1-N / N-1 / N-N from its train triples.

    ``mu_rt`` is the mean number of heads per tail and ``mu_rh`` the mean
    number of tails per head. A value of exactly 1.5 counts as "N".
    """
    r = kg.relation_index[relation] if isinstance(relation, str) else int(relation)
    rows = kg.train[kg.train[:, 1] == r]
    if len(rows) == 0:
        raise UndefinedCardinalityError(f"relation {kg.relations[r]!r} has no train triples")
    n = len(rows)
    mu_rt = n / len(np.unique(rows[:, 2]))
    mu_rh = n / len(np.unique(rows[:, 0]))
    many_heads = mu_rt >= CARDINALITY_THRESHOLD
    many_tails = mu_rh >= CARDINALITY_THRESHOLD
    tag = {
        (False, False): "OneOne",
        (False, True): "OneN",
        (True, False): "NOne",
        (True, True): "NN",
    }[(many_heads, many_tails)]
    return CardinalityClass(tag, mu_rt, mu_rh)


def cardinality_classes(kg: KnowledgeGraph) -> dict[int, CardinalityClass]:
    """Classes of every relation that has train triples."""
    present = np.unique(kg.train[:, 1]) if len(kg.train) else []
    return {int(r): classify_relation_cardinality(kg, int(r)) for r in present}


# ---------------------------------------------------------------------------
# ground patterns


@dataclass(frozen=True)
class Atom:
    relation: str
    args: tuple[str, str]
    inverse: bool = False

    def oriented(self) -> tuple[str, str]:
        """Variables in (head slot, tail slot) order of the stored relation."""
        return (self.args[1], self.args[0]) if self.inverse else self.args

    def __str__(self):
        suffix = "^-1" if self.inverse else ""
        return f"{self.relation}{suffix}({self.args[0]},{self.args[1]})"


@dataclass(frozen=True)
class GroundPattern:
    body: tuple[Atom, ...]
    head: Atom

    def __post_init__(self):
        if not self.body:
            raise ValueError("a pattern needs at least one body atom")

    def __str__(self):
        return " & ".join(map(str, self.body)) + " => " + str(self.head)


_ATOM_RE = re.compile(r"^\s*([^\s(&]+?)(\^-1)?\(\s*([A-Za-z_]\w*)\s*,\s*([A-Za-z_]\w*)\s*\)\s*$")


def parse_atom(text: str, line_number: int | None = None) -> Atom:
    m = _ATOM_RE.match(text)
    if not m:
        raise ParseError(f"cannot parse atom {text.strip()!r}", line_number)
    rel, inv, a, b = m.groups()
    return Atom(rel, (a, b), inverse=inv is not None)


def parse_pattern(text: str, line_number: int | None = None) -> GroundPattern:
    """Parse ``r1(X,Y) & r2(Y,Z) => r3(X,Z)``; ``r^-1(X,Y)`` marks an inverse atom."""
    if "=>" not in text:
        raise ParseError("pattern must contain '=>'", line_number)
    body_text, head_text = text.split("=>", 1)
    body = tuple(parse_atom(part, line_number) for part in body_text.split("&"))
    return GroundPattern(body, parse_atom(head_text, line_number))


def read_patterns(lines: Iterable[str]) -> list[GroundPattern]:
    out = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(parse_pattern(line, lineno))
    return out


class _TripleIndex:
    def __init__(self, triples: Iterable[tuple[int, int, int]]):
        self.pairs: dict[int, set[tuple[int, int]]] = defaultdict(set)
        self.tails: dict[tuple[int, int], set[int]] = defaultdict(set)
        self.heads: dict[tuple[int, int], set[int]] = defaultdict(set)
        for h, r, t in triples:
            self.add(h, r, t)

    def add(self, h, r, t):
        self.pairs[r].add((h, t))
        self.tails[(r, h)].add(t)
        self.heads[(r, t)].add(h)

    def holds(self, r, h, t) -> bool:
        return t in self.tails.get((r, h), ())


def _bindings(index: _TripleIndex, atoms, rel_ids, binding: dict) -> Iterator[dict]:
    """Backtracking enumeration of variable bindings satisfying ``atoms``."""
    if not atoms:
        yield binding
        return
    atom, rest = atoms[0], atoms[1:]
    r = rel_ids.get(atom.relation)
    if r is None:
        return
    hv, tv = atom.oriented()
    h, t = binding.get(hv), binding.get(tv)
    if h is not None and t is not None:
        if index.holds(r, h, t):
            yield from _bindings(index, rest, rel_ids, binding)
    elif h is not None:
        for cand in sorted(index.tails.get((r, h), ())):
            yield from _bindings(index, rest, rel_ids, {**binding, tv: cand})
    elif t is not None:
        for cand in sorted(index.heads.get((r, t), ())):
            yield from _bindings(index, rest, rel_ids, {**binding, hv: cand})
    else:
        for a, b in sorted(index.pairs.get(r, ())):
            if hv == tv and a != b:
                continue
            yield from _bindings(index, rest, rel_ids, {**binding, hv: a, tv: b})


def _head_pair(pattern: GroundPattern, binding: dict) -> tuple[int, int]:
    hv, tv = pattern.head.oriented()
    return binding[hv], binding[tv]


def head_coverage(kg: KnowledgeGraph, pattern: GroundPattern) -> float:
    """Fraction of the head relation's train pairs whose body is satisfiable in train.

    Body variables other than the head's are existentially quantified and may
    bind the same entity as other variables.
    """
    r = kg.relation_index.get(pattern.head.relation)
    if r is None:
        raise UndefinedCoverageError(f"head relation {pattern.head.relation!r} not in vocabulary")
    train = [tuple(x) for x in kg.train.tolist()]
    heads = {(h, t) for h, rr, t in train if rr == r}
    if not heads:
        raise UndefinedCoverageError(f"head relation {pattern.head.relation!r} has no train triples")
    index = _TripleIndex(train)
    hv, tv = pattern.head.oriented()
    supported = 0
    for x, y in heads:
        if hv == tv and x != y:
            # head atom r(X,X) only covers self-loops
            continue
        start = {hv: x, tv: y}
        if next(_bindings(index, list(pattern.body), kg.relation_index, start), None) is not None:
            supported += 1
    return supported / len(heads)


def forward_chain(kg: KnowledgeGraph, pattern: GroundPattern, steps: int) -> list[set[tuple[int, int, int]]]:
    """Apply ``pattern`` to train ``steps`` times.

    Returns the list of newly derived triples per step (empty sets once the
    fixpoint is reached).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    r = kg.relation_index.get(pattern.head.relation)
    known = {tuple(x) for x in kg.train.tolist()}
    index = _TripleIndex(known)
    per_step = []
    for _ in range(steps):
        new = set()
        if r is not None:
            for binding in _bindings(index, list(pattern.body), kg.relation_index, {}):
                h, t = _head_pair(pattern, binding)
                triple = (h, r, t)
                if triple not in known:
                    new.add(triple)
        for triple in new:
            known.add(triple)
            index.add(*triple)
        per_step.append(new)
    return per_step


def derive_pattern_testset(kg: KnowledgeGraph, pattern: GroundPattern, steps: int) -> set[tuple[int, int, int]]:
    """Test triples derivable from train within ``steps`` applications of ``pattern``."""
    derived = set().union(*forward_chain(kg, pattern, steps))
    return derived & kg.triple_set("test")
