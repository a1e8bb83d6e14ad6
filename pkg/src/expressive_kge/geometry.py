"""Geometry of relation embeddings in one correlation subspace.

Dimension ``j`` of a relation is a parallelogram in the plane spanned by the
head coordinate ``x = e_h[j]`` and the tail coordinate ``y = e_t[j]``: the
intersection of a head band ``|x - c_h - r_t*y| <= d_h`` and a tail band
``|y - c_t - r_h*x| <= d_t``. Every predicate here reduces to questions about
small systems of half-planes ``a*x + b*y <= c``, which are answered exactly
(up to an absolute slack) by a two-variable linear program.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

from importlib.resources import files

import numpy as np

from .model import ModelConfig, RelationEmbedding, model_from_dict

HALFPLANE_TOL = 1e-9
DEGENERACY_EPS = 1e-9
_PARALLEL_EPS = 1e-12


# ---------------------------------------------------------------------------
# two-variable linear programming


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal", "unbounded" or "infeasible"
    value: float = float("nan")
    point: np.ndarray | None = None


def _normalized(constraints):
    """Rows scaled to unit normals; returns ``(rows, infeasible)``."""
    rows = np.asarray(constraints, dtype=float).reshape(-1, 3)
    norms = np.hypot(rows[:, 0], rows[:, 1])
    zero = norms < 1e-15
    infeasible = bool(np.any(rows[zero, 2] < -HALFPLANE_TOL))
    rows = rows[~zero] / norms[~zero, None]
    return rows, infeasible


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _candidate_vertices(rows, tol):
    n = len(rows)
    pts = []
    for i, k in itertools.combinations(range(n), 2):
        det = _cross(rows[i, :2], rows[k, :2])
        if abs(det) < _PARALLEL_EPS:
            continue
        x = (rows[i, 2] * rows[k, 1] - rows[k, 2] * rows[i, 1]) / det
        y = (rows[i, 0] * rows[k, 2] - rows[k, 0] * rows[i, 2]) / det
        pts.append((x, y))
    if not pts:
        return np.zeros((0, 2))
    pts = np.asarray(pts)
    ok = np.all(pts @ rows[:, :2].T <= rows[:, 2] + tol, axis=1)
    return pts[ok]


def _dedupe(points, tol=1e-9):
    out = []
    for p in points:
        if not any(np.max(np.abs(p - q)) <= tol for q in out):
            out.append(p)
    return np.asarray(out).reshape(-1, 2)


def maximize(constraints, objective, tol: float = HALFPLANE_TOL) -> LPResult:
    """Maximize ``objective . v`` subject to ``a*x + b*y <= c`` for each row ``(a, b, c)``."""
    rows, infeasible = _normalized(constraints)
    obj = np.asarray(objective, dtype=float)
    obj_norm = float(np.hypot(*obj))
    if infeasible:
        return LPResult("infeasible")
    if len(rows) == 0:
        if obj_norm == 0.0:
            return LPResult("optimal", 0.0, np.zeros(2))
        return LPResult("unbounded", float("inf"))

    normal = rows[0, :2]
    if np.all(np.abs(_cross(rows[:, :2], normal)) < _PARALLEL_EPS):
        # all boundaries parallel: a strip, a half-plane or empty
        side = rows[:, :2] @ normal
        upper = rows[side > 0, 2]
        lower = -rows[side < 0, 2]
        hi = upper.min() if len(upper) else np.inf
        lo = lower.max() if len(lower) else -np.inf
        if lo > hi + tol:
            return LPResult("infeasible")
        if obj_norm == 0.0:
            t = hi if np.isfinite(hi) else (lo if np.isfinite(lo) else 0.0)
            return LPResult("optimal", 0.0, t * normal)
        if abs(_cross(obj, normal)) > _PARALLEL_EPS * obj_norm:
            return LPResult("unbounded", float("inf"))
        mu = float(obj @ normal)
        t = hi if mu > 0 else lo
        if not np.isfinite(t):
            return LPResult("unbounded", float("inf"))
        return LPResult("optimal", mu * t, t * normal)

    verts = _candidate_vertices(rows, tol)
    if len(verts) == 0:
        return LPResult("infeasible")
    if obj_norm > 0.0:
        for r in rows:
            for d in (np.array([-r[1], r[0]]), np.array([r[1], -r[0]])):
                if np.all(rows[:, :2] @ d <= _PARALLEL_EPS) and obj @ d > _PARALLEL_EPS * obj_norm:
                    return LPResult("unbounded", float("inf"))
    vals = verts @ obj
    i = int(np.argmax(vals))
    return LPResult("optimal", float(vals[i]), verts[i])


def is_feasible(constraints, tol: float = HALFPLANE_TOL) -> bool:
    return maximize(constraints, (0.0, 0.0), tol).status != "infeasible"


# ---------------------------------------------------------------------------
# regions


@dataclass
class ConvexRegion2D:
    """Intersection of half-planes ``a*u + b*v <= c`` (rows ``(a, b, c)``).

    May be empty or unbounded. ``labels`` optionally names where each row
    came from.
    """

    constraints: np.ndarray
    labels: list[str] | None = None

    def __post_init__(self):
        self.constraints = np.asarray(self.constraints, dtype=float).reshape(-1, 3)

    def is_empty(self, tol: float = HALFPLANE_TOL) -> bool:
        return not is_feasible(self.constraints, tol)

    def contains(self, point, tol: float = HALFPLANE_TOL) -> bool:
        rows, infeasible = _normalized(self.constraints)
        if infeasible:
            return False
        return bool(np.all(rows[:, :2] @ np.asarray(point, dtype=float) <= rows[:, 2] + tol))

    def intersect(self, other: "ConvexRegion2D") -> "ConvexRegion2D":
        return ConvexRegion2D(np.vstack([self.constraints, other.constraints]))

    def maximize(self, objective) -> LPResult:
        return maximize(self.constraints, objective)

    def is_bounded(self) -> bool:
        return all(self.maximize(d).status != "unbounded" for d in ((1, 0), (-1, 0), (0, 1), (0, -1)))

    def vertices(self, tol: float = HALFPLANE_TOL) -> np.ndarray:
        """Vertices in counter-clockwise order (empty for empty or vertex-free regions)."""
        rows, infeasible = _normalized(self.constraints)
        if infeasible or len(rows) < 2:
            return np.zeros((0, 2))
        pts = _dedupe(_candidate_vertices(rows, tol))
        if len(pts) > 2:
            centroid = pts.mean(axis=0)
            angles = np.arctan2(pts[:, 1] - centroid[1], pts[:, 0] - centroid[0])
            pts = pts[np.argsort(angles)]
        return pts

    def projection(self, axis: int) -> tuple[float, float] | None:
        """Tightest interval containing the projection on ``axis`` (None if empty)."""
        e = np.zeros(2)
        e[axis] = 1.0
        hi = self.maximize(e)
        if hi.status == "infeasible":
            return None
        lo = self.maximize(-e)
        return (-lo.value if lo.status == "optimal" else -np.inf, hi.value if hi.status == "optimal" else np.inf)


def containment_margin(container, inner, tol: float = HALFPLANE_TOL) -> float:
    """Smallest ``c - max_{v in inner} a.v`` over the container's unit-normal rows.

    ``+inf`` when ``inner`` is empty, ``-inf`` when ``inner`` escapes a row.
    """
    if not is_feasible(inner, tol):
        return np.inf
    rows, infeasible = _normalized(container)
    if infeasible:
        return -np.inf
    worst = np.inf
    for a, b, c in rows:
        res = maximize(inner, (a, b), tol)
        if res.status == "unbounded":
            return -np.inf
        worst = min(worst, c - res.value)
    return float(worst)


def region_contains(container, inner, slack: float = 0.0, tol: float = HALFPLANE_TOL) -> bool:
    return containment_margin(container, inner, tol) >= -(tol + slack)


# ---------------------------------------------------------------------------
# bands and parallelograms


@dataclass(frozen=True)
class Band:
    """``|x - center - slope*y| <= width`` (head) or ``|y - center - slope*x| <= width`` (tail)."""

    center: float
    width: float
    slope: float
    orientation: str = "head"

    def __post_init__(self):
        if self.width < 0:
            raise ValueError("band width must be non-negative")
        if self.orientation not in ("head", "tail"):
            raise ValueError(f"orientation must be 'head' or 'tail', not {self.orientation!r}")

    def halfplanes(self) -> np.ndarray:
        c, w, s = self.center, self.width, self.slope
        if self.orientation == "head":
            return np.array([[1.0, -s, c + w], [-1.0, s, -c + w]])
        return np.array([[-s, 1.0, c + w], [s, -1.0, -c + w]])

    def residual(self, x, y):
        if self.orientation == "head":
            return np.abs(x - self.center - self.slope * y)
        return np.abs(y - self.center - self.slope * x)

    def contains(self, x, y, tol: float = 0.0):
        return self.residual(x, y) <= self.width + tol


@dataclass(frozen=True)
class Parallelogram:
    head_band: Band
    tail_band: Band
    j: int = 0

    @property
    def delta(self) -> float:
        return 1.0 - self.head_band.slope * self.tail_band.slope

    @property
    def bounded(self) -> bool:
        return abs(self.delta) > DEGENERACY_EPS

    def halfplanes(self) -> np.ndarray:
        return np.vstack([self.head_band.halfplanes(), self.tail_band.halfplanes()])

    def region(self) -> ConvexRegion2D:
        return ConvexRegion2D(self.halfplanes(), ["head<=", "head>=", "tail<=", "tail>="])

    def contains(self, x, y, tol: float = 0.0):
        return self.head_band.contains(x, y, tol) & self.tail_band.contains(x, y, tol)

    def is_empty(self) -> bool:
        return self.region().is_empty()

    def vertices(self) -> np.ndarray:
        return self.region().vertices()


def parallelogram_of(relation: RelationEmbedding, j: int = 0) -> Parallelogram:
    if not 0 <= j < relation.dim:
        raise IndexError(f"dimension {j} out of range for dim {relation.dim}")
    head = Band(float(relation.c_h[j]), float(relation.d_h[j]), float(relation.r_t[j]), "head")
    tail = Band(float(relation.c_t[j]), float(relation.d_t[j]), float(relation.r_h[j]), "tail")
    return Parallelogram(head, tail, j)


def parallelograms(relation: RelationEmbedding) -> list[Parallelogram]:
    return [parallelogram_of(relation, j) for j in range(relation.dim)]


class UnboundedShapeError(ValueError):
    pass


def center_and_corners(p: Parallelogram) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form center and corners of a bounded parallelogram.

    Corners with coinciding coordinates (a zero width) are merged, so two
    points are returned for a segment and one for a single point.
    """
    if not p.bounded:
        raise UnboundedShapeError(f"|1 - r_h*r_t| = {abs(p.delta):.3g} <= {DEGENERACY_EPS}")
    c_h, d_h, r_t = p.head_band.center, p.head_band.width, p.head_band.slope
    c_t, d_t, r_h = p.tail_band.center, p.tail_band.width, p.tail_band.slope
    delta = p.delta
    center = np.array([(c_h + r_t * c_t) / delta, (r_h * c_h + c_t) / delta])
    a = np.array([(d_h + r_t * d_t) / delta, (r_h * d_h + d_t) / delta])
    b = np.array([(d_h - r_t * d_t) / delta, (r_h * d_h - d_t) / delta])
    corners = _dedupe(np.array([center + a, center + b, center - a, center - b]), tol=1e-12)
    return center, corners


def mirror(p: Parallelogram) -> Parallelogram:
    """Reflection across the identity line: ``(x, y)`` in p iff ``(y, x)`` in mirror(p)."""
    hb, tb = p.head_band, p.tail_band
    return Parallelogram(
        Band(tb.center, tb.width, tb.slope, "head"),
        Band(hb.center, hb.width, hb.slope, "tail"),
        p.j,
    )


def mirror_relation(relation: RelationEmbedding) -> RelationEmbedding:
    return RelationEmbedding(
        c_h=relation.c_t.copy(), c_t=relation.c_h.copy(),
        d_h=relation.d_t.copy(), d_t=relation.d_h.copy(),
        r_h=relation.r_t.copy(), r_t=relation.r_h.copy(),
    )


def _as_rows(shape) -> np.ndarray:
    if isinstance(shape, Parallelogram):
        return shape.halfplanes()
    if isinstance(shape, ConvexRegion2D):
        return shape.constraints
    return np.asarray(shape, dtype=float).reshape(-1, 3)


def subsumes(p1, p2, slack: float = 0.0) -> bool:
    """True iff every point of ``p2`` lies in ``p1``."""
    return region_contains(_as_rows(p1), _as_rows(p2), slack)


def regions_equal(p1, p2, slack: float = 0.0) -> bool:
    return subsumes(p1, p2, slack) and subsumes(p2, p1, slack)


def intersect_empty(p1, p2) -> bool:
    return not is_feasible(np.vstack([_as_rows(p1), _as_rows(p2)]))


def intersection_subsumed(p1, p2, p3, slack: float = 0.0) -> bool:
    """True iff ``p1 ∩ p2 ⊆ p3``."""
    return region_contains(_as_rows(p3), np.vstack([_as_rows(p1), _as_rows(p2)]), slack)


def region_subsumed_by(region, p, slack: float = 0.0) -> bool:
    return region_contains(_as_rows(p), _as_rows(region), slack)


def is_symmetric(p: Parallelogram, slack: float = 0.0) -> bool:
    return regions_equal(p, mirror(p), slack)


def is_antisymmetric(p: Parallelogram) -> bool:
    """Mirror-disjointness: no point of ``p`` has its mirror image in ``p``."""
    return intersect_empty(p, mirror(p))


# ---------------------------------------------------------------------------
# head and tail intervals


@dataclass(frozen=True)
class IntervalPair:
    head_interval: tuple[float, float] | None
    tail_interval: tuple[float, float] | None

    @property
    def empty(self) -> bool:
        return self.head_interval is None


def head_tail_intervals(p) -> IntervalPair:
    region = p.region() if isinstance(p, Parallelogram) else p
    return IntervalPair(region.projection(0), region.projection(1))


def intervals_overlap(a, b, tol: float = HALFPLANE_TOL) -> bool:
    if a is None or b is None:
        return False
    return max(a[0], b[0]) <= min(a[1], b[1]) + tol


# ---------------------------------------------------------------------------
# compositionally defined regions


def _composition_rows(r1: RelationEmbedding, r2: RelationEmbedding, j: int) -> np.ndarray:
    """The eight half-planes over ``(x, y, z)`` encoding ``r1(x, y)`` and ``r2(y, z)``.

    Rows are ``(a_x, a_y, a_z, c)`` meaning ``a_x*x + a_y*y + a_z*z <= c``.
    """
    c1h, d1h, r1t = r1.c_h[j], r1.d_h[j], r1.r_t[j]
    c1t, d1t, r1h = r1.c_t[j], r1.d_t[j], r1.r_h[j]
    c2h, d2h, r2t = r2.c_h[j], r2.d_h[j], r2.r_t[j]
    c2t, d2t, r2h = r2.c_t[j], r2.d_t[j], r2.r_h[j]
    return np.array(
        [
            [1.0, -r1t, 0.0, c1h + d1h],
            [-1.0, r1t, 0.0, -c1h + d1h],
            [-r1h, 1.0, 0.0, c1t + d1t],
            [r1h, -1.0, 0.0, -c1t + d1t],
            [0.0, 1.0, -r2t, c2h + d2h],
            [0.0, -1.0, r2t, -c2h + d2h],
            [0.0, -r2h, 1.0, c2t + d2t],
            [0.0, r2h, -1.0, -c2t + d2t],
        ],
        dtype=float,
    )


def eliminate_variable(rows: np.ndarray, col: int) -> np.ndarray:
    """One Fourier-Motzkin step: project ``rows`` (last column = rhs) along ``col``."""
    coef = rows[:, col]
    pos, neg, zero = rows[coef > 0], rows[coef < 0], rows[coef == 0]
    combos = [(-n[col]) * p + p[col] * n for p in pos for n in neg]
    out = np.vstack([zero] + [np.asarray(combos).reshape(-1, rows.shape[1])])
    return np.delete(out, col, axis=1)


def comp_def_region(r1: RelationEmbedding, r2: RelationEmbedding, j: int = 0) -> ConvexRegion2D:
    """Region of pairs ``(x, z)`` with some ``y`` such that ``r1(x, y)`` and ``r2(y, z)``.

    ``y`` is eliminated by Fourier-Motzkin, which handles every sign pattern
    of the slopes and never divides by a slope. Rows that lose both
    variables are dropped when satisfied; an unsatisfied one is kept so the
    region reports empty.
    """
    rows = eliminate_variable(_composition_rows(r1, r2, j), col=1)
    keep = []
    for a, b, c in rows:
        if abs(a) < 1e-15 and abs(b) < 1e-15:
            if c >= -HALFPLANE_TOL:
                continue
            keep.append((0.0, 0.0, c))
            continue
        keep.append((a, b, c))
    keep = _dedupe_rows(np.asarray(keep).reshape(-1, 3))
    return ConvexRegion2D(keep)


def _dedupe_rows(rows: np.ndarray) -> np.ndarray:
    out, seen = [], []
    for row in rows:
        n = np.hypot(row[0], row[1])
        key = row / n if n > 0 else row
        if any(np.max(np.abs(key - k)) <= 1e-12 for k in seen):
            continue
        seen.append(key)
        out.append(row)
    return np.asarray(out).reshape(-1, 3)


def composition_inequalities(r1: RelationEmbedding, r2: RelationEmbedding, j: int = 0) -> np.ndarray:
    """Closed-form constraints of the composed region for non-negative slopes.

    Returns six rows ``(a, b, offset, bound)`` meaning
    ``|a*x + b*z + offset| <= bound``. The fourth row divides by ``r1.r_t``.
    """
    c1h, d1h, r1t = r1.c_h[j], r1.d_h[j], r1.r_t[j]
    c1t, d1t, r1h = r1.c_t[j], r1.d_t[j], r1.r_h[j]
    c2h, d2h, r2t = r2.c_h[j], r2.d_h[j], r2.r_t[j]
    c2t, d2t, r2h = r2.c_t[j], r2.d_t[j], r2.r_h[j]
    if min(r1t, r1h, r2t, r2h) < 0:
        raise ValueError("closed form requires non-negative slopes; use comp_def_region")
    if r1t == 0:
        raise ZeroDivisionError("r1.r_t is zero")
    q = r2h / r1t
    return np.array(
        [
            [1.0, -r1t * r2t, -c2h * r1t - c1h, d2h * r1t + d1h],
            [-r1h, r2t, c2h - c1t, d1t + d2h],
            [-r1h * r2h, 1.0, -c1t * r2h - c2t, d1t * r2h + d2t],
            [-q, 1.0, c1h * q - c2t, d1h * q + d2t],
            [1.0 - r1h * r1t, 0.0, -c1t * r1t - c1h, d1t * r1t + d1h],
            [0.0, 1.0 - r2h * r2t, -c2h * r2h - c2t, d2h * r2h + d2t],
        ]
    )


def abs_constraints_to_rows(abs_rows) -> np.ndarray:
    """Expand ``|a*x + b*z + o| <= w`` rows into pairs of half-planes."""
    out = []
    for a, b, o, w in np.asarray(abs_rows, dtype=float):
        out.append((a, b, w - o))
        out.append((-a, -b, w + o))
    return np.asarray(out)


def composition_witness(r1: RelationEmbedding, r2: RelationEmbedding, j: int, x: float, z: float):
    """Interval of middle values ``y`` with ``r1(x, y)`` and ``r2(y, z)`` (None if empty)."""
    rows = _composition_rows(r1, r2, j)
    lo, hi = -np.inf, np.inf
    for ax, ay, az, c in rows:
        rest = c - ax * x - az * z
        if ay > 0:
            hi = min(hi, rest / ay)
        elif ay < 0:
            lo = max(lo, rest / ay)
        elif rest < -HALFPLANE_TOL:
            return None
    return (lo, hi) if lo <= hi + HALFPLANE_TOL else None


# ---------------------------------------------------------------------------
# pattern certification


@dataclass
class Certificate:
    pattern: str
    relations: tuple[str, ...]
    holds: bool
    per_dimension: list[dict] = field(default_factory=list)
    margin: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "pattern": self.pattern,
            "relations": list(self.relations),
            "holds": self.holds,
            "margin": _json_float(self.margin),
            "per_dimension": [
                {"j": d["j"], "holds": d["holds"], "witness_or_margin": _json_float(d["witness_or_margin"])}
                for d in self.per_dimension
            ],
        }


def _json_float(v):
    if v is None:
        return None
    v = float(v)
    if np.isnan(v):
        return None
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _forall(pattern, names, margins, slack):
    dims = [{"j": j, "holds": bool(m >= -(HALFPLANE_TOL + slack)), "witness_or_margin": m} for j, m in enumerate(margins)]
    holds = all(d["holds"] for d in dims)
    return Certificate(pattern, names, holds, dims, float(min(margins)) if margins else np.nan)


def _exists(pattern, names, flags, witnesses):
    dims = [{"j": j, "holds": bool(f), "witness_or_margin": w} for j, (f, w) in enumerate(zip(flags, witnesses))]
    return Certificate(pattern, names, any(flags), dims, np.nan)


def _equality_margin(a, b):
    return min(containment_margin(a, b), containment_margin(b, a))


def certify_patterns(
    model: ModelConfig,
    relations=None,
    max_body_len: int = 2,
    slack: float = 0.0,
    include_failed: bool = False,
) -> list[Certificate]:
    """Check which inference patterns the relation embeddings capture.

    Positive patterns (symmetry, inversion, hierarchy, intersection,
    compositional definition, general composition) must hold in every
    dimension, with ``slack`` loosening the containing region. Patterns whose
    premise region is empty in some dimension are vacuous and not reported.
    Negative patterns (anti-symmetry as mirror-disjointness, mutual
    exclusion) need a separating dimension; anti-symmetry certificates also
    record whether the relation is merely not symmetric somewhere.
    """
    if relations is None:
        idx = list(range(model.n_relations))
    else:
        idx = [model.relation_position(r) for r in relations]
    names = {
        i: (model.relation_ids[i] if model.relation_ids is not None else f"r{i}") for i in idx
    }
    rels = {i: model.relation(i) for i in idx}
    polys = {i: parallelograms(rels[i]) for i in idx}
    dims = range(model.dim)
    nonempty = {i: all(not p.is_empty() for p in polys[i]) for i in idx}
    certs: list[Certificate] = []

    def emit(cert):
        if cert.holds or include_failed:
            certs.append(cert)

    for i in idx:
        if not nonempty[i]:
            continue
        ps = polys[i]
        emit(_forall("symmetry", (names[i],), [_equality_margin(p.halfplanes(), mirror(p).halfplanes()) for p in ps], slack))
        flags = [is_antisymmetric(p) for p in ps]
        cert = _exists("anti-symmetry", (names[i],), flags, [None] * len(ps))
        cert.not_symmetric_somewhere = not all(is_symmetric(p) for p in ps)
        emit(cert)

    if max_body_len >= 1:
        for a, b in itertools.permutations(idx, 2):
            if not (nonempty[a] and nonempty[b]):
                continue
            pa, pb = polys[a], polys[b]
            if a < b:
                emit(_forall("inversion", (names[a], names[b]),
                             [_equality_margin(pa[j].halfplanes(), mirror(pb[j]).halfplanes()) for j in dims], slack))
                flags = [intersect_empty(pa[j], pb[j]) for j in dims]
                emit(_exists("mutual-exclusion", (names[a], names[b]), flags, [None] * len(flags)))
            emit(_forall("hierarchy", (names[a], names[b]),
                         [containment_margin(pb[j].halfplanes(), pa[j].halfplanes()) for j in dims], slack))

    if max_body_len >= 2:
        for a, b in itertools.combinations(idx, 2):
            pa, pb = polys[a], polys[b]
            if any(intersect_empty(pa[j], pb[j]) for j in dims):
                continue
            for c in idx:
                if c in (a, b):
                    continue
                pc = polys[c]
                margins = [containment_margin(pc[j].halfplanes(), np.vstack([pa[j].halfplanes(), pb[j].halfplanes()])) for j in dims]
                emit(_forall("intersection", (names[a], names[b], names[c]), margins, slack))

        for a, b in itertools.product(idx, repeat=2):
            if not (nonempty[a] and nonempty[b]):
                continue
            gate = [
                intervals_overlap(head_tail_intervals(polys[a][j]).tail_interval,
                                  head_tail_intervals(polys[b][j]).head_interval)
                for j in dims
            ]
            if not all(gate):
                continue
            regions = [comp_def_region(rels[a], rels[b], j) for j in dims]
            if any(reg.is_empty() for reg in regions):
                continue
            for c in idx:
                pc = polys[c]
                margins = [containment_margin(pc[j].halfplanes(), regions[j].constraints) for j in dims]
                emit(_forall("general-composition", (names[a], names[b], names[c]), margins, slack))
                eq = [min(m, containment_margin(regions[j].constraints, pc[j].halfplanes())) for j, m in enumerate(margins)]
                emit(_forall("compositional-definition", (names[a], names[b], names[c]), eq, slack))
    return certs


def certificates_to_json(certs) -> list[dict]:
    out = []
    for c in certs:
        d = c.to_dict()
        if hasattr(c, "not_symmetric_somewhere"):
            d["not_symmetric_somewhere"] = c.not_symmetric_somewhere
        out.append(d)
    return out


FIXTURES = ("intersection", "general_composition", "chained_composition")


def load_fixture(name: str) -> ModelConfig:
    """One of the bundled single-dimension relation tables, as a checkpoint."""
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {FIXTURES}")
    text = files("expressive_kge").joinpath("fixtures").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return model_from_dict(json.loads(text))
