"""Training: self-adversarial loss with analytic gradients, Adam, early stopping.

Adam works on unconstrained free parameters. Stored entity, center and slope
values are ``tanh`` of their free parameters and widths are ``softplus`` of
theirs, so every optimizer step yields a valid model. After each step the
slope pairs are shrunk where needed to keep ``|1 - r_h*r_t| >= d_min``.
"""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.special import expit, log_expit

from .kg import KnowledgeGraph
from .model import ModelConfig, Variant, score

log = logging.getLogger(__name__)

LOG_COLUMNS = ("epoch", "loss", "mrr", "hits@1", "hits@3", "hits@10", "wall_time")
_TANH_FIELDS = ("entities", "c_h", "c_t", "r_h", "r_t")
_WIDTH_FIELDS = ("d_h", "d_t")


class ConfigError(ValueError):
    pass


class SamplingExhaustedError(RuntimeError):
    pass


class NonFiniteGradientError(FloatingPointError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    margin: float = 3.0
    adversarial_temperature: float = 2.0
    negatives_per_positive: int = 100
    batch_size: int = 512
    max_epochs: int = 1000
    patience_epochs: int = 100
    min_hits10_gain: float = 0.005
    d_min: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.adversarial_temperature < 0:
            raise ConfigError("adversarial_temperature must be >= 0")
        if self.negatives_per_positive < 1:
            raise ConfigError("negatives_per_positive must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.max_epochs < 0:
            raise ConfigError("max_epochs must be >= 0")
        if self.patience_epochs < 0 or (self.max_epochs > 0 and self.patience_epochs > self.max_epochs):
            raise ConfigError("patience_epochs must lie in [0, max_epochs]")
        if self.min_hits10_gain < 0:
            raise ConfigError("min_hits10_gain must be >= 0")
        # a product of two values in [-1, 1] cannot push 1 - r_h*r_t past 1 from below
        if not 0.0 <= self.d_min <= 1.0:
            raise ConfigError("d_min must lie in [0, 1]")


_EXTRA_KEYS = {"dim": int, "variant": str}


def _coerce(name: str, value, kind):
    if isinstance(value, str):
        value = value.strip()
    try:
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(float(value)) if isinstance(value, str) else int(value)
        if kind is float:
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot interpret {value!r} as {kind.__name__}") from None


def config_from_mapping(values: dict) -> tuple[TrainConfig, dict]:
    """Split a flat mapping into a ``TrainConfig`` and model options (``dim``, ``variant``)."""
    kinds = {f.name: (int if f.type in ("int", int) else float) for f in fields(TrainConfig)}
    train_kw, extra = {}, {}
    for key, value in values.items():
        if key in kinds:
            train_kw[key] = _coerce(key, value, kinds[key])
        elif key in _EXTRA_KEYS:
            extra[key] = _coerce(key, value, _EXTRA_KEYS[key])
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    if "variant" in extra:
        try:
            extra["variant"] = Variant.parse(extra["variant"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if "dim" in extra and extra["dim"] < 1:
        raise ConfigError("dim must be >= 1")
    return TrainConfig(**train_kw), extra


def parse_key_values(lines) -> dict:
    out = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key=value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path, overrides=()) -> tuple[TrainConfig, dict]:
    """Read a JSON or ``key=value`` config file, then apply ``key=value`` overrides."""
    values: dict = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        if text.lstrip().startswith("{"):
            try:
                values = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        else:
            values = parse_key_values(text.splitlines())
    values.update(parse_key_values(overrides))
    return config_from_mapping(values)


# ---------------------------------------------------------------------------
# parameterization


def softplus(x):
    return np.logaddexp(0.0, x)


def softplus_inverse(y):
    y = np.maximum(np.asarray(y, dtype=float), 1e-12)
    return np.where(y > 30, y, np.log(np.expm1(np.minimum(y, 30))))


def _arctanh(v):
    return np.arctanh(np.clip(v, -1 + 1e-15, 1 - 1e-15))


@dataclass
class Parameters:
    """Free (unconstrained) parameters of a model of a given variant.

    Functional has no width parameters, NoCenter no center parameters and
    EqSlopes a single ``(1, d)`` row per slope array shared by all relations.
    """

    values: dict[str, np.ndarray]
    n_relations: int
    variant: Variant = Variant.BASE
    entity_ids: list[str] | None = None
    relation_ids: list[str] | None = None

    def copy(self) -> "Parameters":
        return Parameters({k: v.copy() for k, v in self.values.items()}, self.n_relations,
                          self.variant, self.entity_ids, self.relation_ids)

    @property
    def dim(self) -> int:
        return self.values["entities"].shape[1]

    def to_model(self) -> ModelConfig:
        v = self.values
        shape = (self.n_relations, self.dim)
        arrays = {}
        for f in ("c_h", "c_t", "r_h", "r_t"):
            arrays[f] = np.broadcast_to(np.tanh(v[f]), shape).copy() if f in v else np.zeros(shape)
        for f in _WIDTH_FIELDS:
            arrays[f] = softplus(v[f]) if f in v else np.zeros(shape)
        return ModelConfig(entities=np.tanh(v["entities"]), variant=self.variant,
                           entity_ids=self.entity_ids, relation_ids=self.relation_ids, **arrays)

    @classmethod
    def from_model(cls, model: ModelConfig) -> "Parameters":
        """Invert the reparameterization (values are clipped into the open range first)."""
        variant = model.variant
        names = parameter_names(variant)
        values = {"entities": _arctanh(model.entities)}
        for f in names:
            if f == "entities":
                continue
            arr = getattr(model, f)
            if variant is Variant.EQ_SLOPES and f in ("r_h", "r_t"):
                arr = arr.mean(axis=0, keepdims=True)
            values[f] = softplus_inverse(arr) if f in _WIDTH_FIELDS else _arctanh(arr)
        return cls(values, model.n_relations, variant, model.entity_ids, model.relation_ids)


def parameter_names(variant) -> tuple[str, ...]:
    variant = Variant.parse(variant)
    names = ["entities", "c_h", "c_t", "d_h", "d_t", "r_h", "r_t"]
    if variant is Variant.FUNCTIONAL:
        names = [n for n in names if n not in _WIDTH_FIELDS]
    if variant is Variant.NO_CENTER:
        names = [n for n in names if n not in ("c_h", "c_t")]
    return tuple(names)


def init_parameters(n_entities: int, n_relations: int, dim: int, variant=Variant.BASE, seed: int = 0,
                    entity_ids=None, relation_ids=None) -> Parameters:
    variant = Variant.parse(variant)
    rng = np.random.default_rng(seed)
    slope_rows = 1 if variant is Variant.EQ_SLOPES else n_relations
    values = {}
    for name in parameter_names(variant):
        if name == "entities":
            values[name] = rng.uniform(-0.5, 0.5, (n_entities, dim))
        elif name in ("r_h", "r_t"):
            values[name] = rng.uniform(-0.5, 0.5, (slope_rows, dim))
        elif name in _WIDTH_FIELDS:
            values[name] = rng.uniform(-2.0, -1.0, (n_relations, dim))
        else:
            values[name] = rng.uniform(-0.2, 0.2, (n_relations, dim))
    return Parameters(values, n_relations, variant, entity_ids, relation_ids)


def init_model(kg: KnowledgeGraph, dim: int, variant=Variant.BASE, seed: int = 0) -> ModelConfig:
    return init_parameters(kg.n_entities, kg.n_relations, dim, variant, seed,
                           list(kg.entities), list(kg.relations)).to_model()


# ---------------------------------------------------------------------------
# loss and gradients


def score_gradients(model: ModelConfig, triples: np.ndarray, upstream: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of ``sum_i upstream[i] * score(triples[i])`` w.r.t. the stored model values.

    Subgradient conventions: ``sign(0) = 0`` for the absolute residual, the
    inside branch at ``tau == width`` and a zero gradient for a zero
    distance vector.
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    h, r, t = triples.T
    d = model.dim
    eh, et = model.entities[h], model.entities[t]
    u_h = eh - model.c_h[r] - model.r_t[r] * et
    u_t = et - model.c_t[r] - model.r_h[r] * eh
    u = np.concatenate([u_h, u_t], axis=1)
    tau = np.abs(u)
    width = np.concatenate([model.d_h[r], model.d_t[r]], axis=1)
    w = 2.0 * width + 1.0
    inside = tau <= width
    dist = np.where(inside, tau / w, tau * w - 0.5 * (w - 1.0) * (w - 1.0 / w))
    if model.variant is Variant.ONE_BAND:
        dist[:, d:] = 0.0
    norm = np.linalg.norm(dist, axis=1)
    safe = np.where(norm > 0, norm, 1.0)
    g_dist = np.where(norm[:, None] > 0, -np.asarray(upstream, dtype=float)[:, None] * dist / safe[:, None], 0.0)
    if model.variant is Variant.ONE_BAND:
        g_dist[:, d:] = 0.0
    dk_dw = 0.5 * (2.0 * w - 1.0 - 1.0 / w**2)
    g_tau = g_dist * np.where(inside, 1.0 / w, w)
    g_width = g_dist * np.where(inside, -2.0 * tau / w**2, 2.0 * (tau - dk_dw))
    g_u = np.sign(u) * g_tau
    gu_h, gu_t = g_u[:, :d], g_u[:, d:]

    grads = {f: np.zeros_like(getattr(model, f)) for f in ("c_h", "c_t", "d_h", "d_t", "r_h", "r_t")}
    grads["entities"] = np.zeros_like(model.entities)
    np.add.at(grads["entities"], h, gu_h - model.r_h[r] * gu_t)
    np.add.at(grads["entities"], t, gu_t - model.r_t[r] * gu_h)
    np.add.at(grads["c_h"], r, -gu_h)
    np.add.at(grads["c_t"], r, -gu_t)
    np.add.at(grads["r_t"], r, -et * gu_h)
    np.add.at(grads["r_h"], r, -eh * gu_t)
    np.add.at(grads["d_h"], r, g_width[:, :d])
    np.add.at(grads["d_t"], r, g_width[:, d:])
    return grads


def negative_weights(s_neg: np.ndarray, temperature: float) -> np.ndarray:
    logits = temperature * np.asarray(s_neg, dtype=float)
    p = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return p / p.sum(axis=-1, keepdims=True)


def adversarial_loss(model: ModelConfig, positives, negatives, margin: float, temperature: float,
                     fixed_weights=None):
    """Self-adversarial negative-sampling loss averaged over positives.

    ``positives`` is ``(B, 3)`` (or one triple) and ``negatives`` is
    ``(B, n, 3)`` (or ``(n, 3)``). Negative weights are a softmax of
    ``temperature * score`` held constant during differentiation.
    Returns ``(loss, grads)`` with gradients w.r.t. the stored model values.
    ``fixed_weights`` replaces the softmax, which lets a finite-difference
    check perturb parameters without moving the weights.
    """
    pos = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    neg = np.asarray(negatives, dtype=np.int64)
    neg = neg.reshape(len(pos), -1, 3)
    b, n = neg.shape[:2]
    if n < 1:
        raise ValueError("at least one negative is required")
    s_pos = score(model, pos).reshape(b)
    s_neg = score(model, neg.reshape(-1, 3)).reshape(b, n)
    if fixed_weights is None:
        p = negative_weights(s_neg, temperature)
    else:
        p = np.asarray(fixed_weights, dtype=float).reshape(b, n)

    per_example = -log_expit(margin + s_pos) - np.sum(p * log_expit(-s_neg - margin), axis=1)
    loss = float(np.mean(per_example))
    g_pos = -expit(-(margin + s_pos)) / b
    g_neg = p * expit(s_neg + margin) / b
    triples = np.concatenate([pos, neg.reshape(-1, 3)])
    upstream = np.concatenate([g_pos, g_neg.reshape(-1)])
    return loss, score_gradients(model, triples, upstream)


def chain_to_free(params: Parameters, model: ModelConfig, value_grads: dict) -> dict[str, np.ndarray]:
    """Map gradients w.r.t. stored values onto the free parameters."""
    out = {}
    for name, theta in params.values.items():
        g = value_grads[name]
        if name in _WIDTH_FIELDS:
            g = g * expit(theta)
        else:
            stored = model.entities if name == "entities" else getattr(model, name)
            g = g * (1.0 - stored**2)
        if params.variant is Variant.EQ_SLOPES and name in ("r_h", "r_t"):
            g = g.sum(axis=0, keepdims=True)
        out[name] = g
    return out


def loss_and_free_grads(params: Parameters, positives, negatives, margin: float, temperature: float,
                        fixed_weights=None):
    model = params.to_model()
    loss, grads = adversarial_loss(model, positives, negatives, margin, temperature, fixed_weights)
    return loss, chain_to_free(params, model, grads)


# ---------------------------------------------------------------------------
# optimizer and projection


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: dict, grads: dict, state: AdamState, learning_rate: float) -> tuple[dict, AdamState]:
    bad = {k: int(np.count_nonzero(~np.isfinite(g))) for k, g in grads.items() if not np.all(np.isfinite(g))}
    if bad:
        raise NonFiniteGradientError(f"non-finite gradient entries at step {state.step + 1}: {bad}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    out = {}
    for k, x in params.items():
        g = grads[k]
        if g.shape != x.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {x.shape} for {k}")
        m = state.m.get(k, np.zeros_like(x))
        v = state.v.get(k, np.zeros_like(x))
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        state.m[k], state.v[k] = m, v
        m_hat = m / (1 - b1**state.step)
        v_hat = v / (1 - b2**state.step)
        out[k] = x - learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return out, state


def rescale_slopes(r_h: np.ndarray, r_t: np.ndarray, d_min: float) -> tuple[np.ndarray, np.ndarray]:
    """Shrink slope pairs whose product exceeds ``1 - d_min`` onto the boundary.

    Both slopes are scaled by the same factor, the smallest change that keeps
    their ratio. Pairs already satisfying the bound are returned unchanged.
    """
    r_h = np.array(r_h, dtype=float)
    r_t = np.array(r_t, dtype=float)
    if d_min <= 0:
        return r_h, r_t
    prod = r_h * r_t
    bad = prod > 1.0 - d_min
    if np.any(bad):
        factor = np.sqrt((1.0 - d_min) / prod[bad])
        r_h[bad] *= factor
        r_t[bad] *= factor
    return r_h, r_t


def project_constraints(params: Parameters, d_min: float) -> Parameters:
    """Enforce ``|1 - r_h*r_t| >= d_min`` on the stored slopes.

    The tanh and softplus maps already keep values in range, so only the
    slope pairs need adjusting; their free parameters are reset accordingly.
    """
    if d_min <= 0:
        return params
    v = params.values
    r_h, r_t = np.tanh(v["r_h"]), np.tanh(v["r_t"])
    new_h, new_t = rescale_slopes(r_h, r_t, d_min)
    changed = (new_h != r_h) | (new_t != r_t)
    if np.any(changed):
        v["r_h"] = np.where(changed, _arctanh(new_h), v["r_h"])
        v["r_t"] = np.where(changed, _arctanh(new_t), v["r_t"])
    return params


# ---------------------------------------------------------------------------
# negative sampling


class _KnownTriples:
    """Sorted integer keys of train triples for vectorized membership tests."""

    def __init__(self, triples: np.ndarray, n_entities: int, n_relations: int):
        self.n_e, self.n_r = n_entities, n_relations
        self.keys = np.unique(self.encode(np.asarray(triples, dtype=np.int64).reshape(-1, 3)))

    def encode(self, triples):
        return (triples[..., 0] * self.n_r + triples[..., 1]) * self.n_e + triples[..., 2]

    def contains(self, triples):
        keys = self.encode(triples)
        pos = np.searchsorted(self.keys, keys)
        pos = np.minimum(pos, len(self.keys) - 1)
        return self.keys[pos] == keys if len(self.keys) else np.zeros(keys.shape, dtype=bool)


def _corrupt(positives, sides, entities):
    out = np.repeat(positives[:, None, :], sides.shape[1], axis=1)
    out[..., 0] = np.where(sides == 0, entities, out[..., 0])
    out[..., 2] = np.where(sides == 1, entities, out[..., 2])
    return out


def sample_negative_batch(kg: KnowledgeGraph, positives, n: int, rng: np.random.Generator,
                          known: _KnownTriples | None = None, max_rounds: int = 50) -> np.ndarray:
    """``(B, n, 3)`` corruptions of ``positives`` that do not occur in the train split.

    Head or tail is chosen uniformly, then a uniform entity. Rejected draws
    are redrawn for ``max_rounds`` rounds; leftovers are drawn uniformly from
    the enumerated valid corruptions, or raise when none exists.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    if known is None:
        known = _KnownTriples(kg.train, kg.n_entities, kg.n_relations)
    n_e = kg.n_entities
    sides = rng.integers(0, 2, size=(len(positives), n))
    ents = rng.integers(0, n_e, size=(len(positives), n))
    out = _corrupt(positives, sides, ents)
    bad = known.contains(out)
    for _ in range(max_rounds):
        if not bad.any():
            return out
        k = int(bad.sum())
        s = rng.integers(0, 2, size=k)
        e = rng.integers(0, n_e, size=k)
        rows = np.nonzero(bad)[0]
        fresh = _corrupt(positives[rows], s[:, None], e[:, None])[:, 0, :]
        out[bad] = fresh
        bad[bad] = known.contains(fresh)
    for b, i in zip(*np.nonzero(bad)):
        h, r, t = positives[b]
        cands = np.concatenate([
            np.column_stack([np.arange(n_e), np.full(n_e, r), np.full(n_e, t)]),
            np.column_stack([np.full(n_e, h), np.full(n_e, r), np.arange(n_e)]),
        ])
        cands = cands[~known.contains(cands)]
        if len(cands) == 0:
            raise SamplingExhaustedError(
                f"no corruption of ({kg.label(positives[b])}) is absent from the train split"
            )
        out[b, i] = cands[rng.integers(len(cands))]
    return out


def sample_negatives(kg: KnowledgeGraph, positive, n: int, rng: np.random.Generator) -> np.ndarray:
    return sample_negative_batch(kg, np.asarray(positive).reshape(1, 3), n, rng)[0]


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainResult:
    model: ModelConfig
    log: list[dict]
    params: Parameters
    stopped_early: bool = False


def default_evaluator(kg: KnowledgeGraph) -> Callable[[ModelConfig], dict]:
    """Filtered ranking on the validation split (falls back to test when empty)."""
    from .evaluation import build_evaluation_filter, evaluate

    split = "valid" if len(kg.valid) else "test"
    flt = build_evaluation_filter(kg)

    def run(model: ModelConfig) -> dict:
        report = evaluate(model, kg, flt, split=split)
        return {"mrr": report.mrr, **{f"hits@{k}": report.hits_at[k] for k in (1, 3, 10)}}

    return run


def write_log(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=LOG_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in LOG_COLUMNS})


def train(kg: KnowledgeGraph, model, config: TrainConfig, evaluator=None, log_path=None) -> TrainResult:
    """Mini-batch training with validation Hits@10 early stopping.

    ``model`` is a ``ModelConfig`` or ``Parameters``. The model of the final
    epoch is returned, without rolling back to the best epoch.
    """
    params = model.copy() if isinstance(model, Parameters) else Parameters.from_model(model)
    if params.values["entities"].shape[0] != kg.n_entities:
        raise ValueError("model is not bound to this knowledge graph")
    if evaluator is None:
        evaluator = default_evaluator(kg)
    rng = np.random.default_rng(config.seed)
    known = _KnownTriples(kg.train, kg.n_entities, kg.n_relations)
    state = AdamState()
    project_constraints(params, config.d_min)
    rows: list[dict] = []
    best, since_best, stopped = None, 0, False
    start = time.perf_counter()

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(kg.train))
        total = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = kg.train[order[lo:lo + config.batch_size]]
            negs = sample_negative_batch(kg, batch, config.negatives_per_positive, rng, known)
            loss, grads = loss_and_free_grads(params, batch, negs, config.margin, config.adversarial_temperature)
            params.values, state = adam_step(params.values, grads, state, config.learning_rate)
            project_constraints(params, config.d_min)
            total += loss * len(batch)
        metrics = evaluator(params.to_model())
        row = {"epoch": epoch, "loss": total / max(len(kg.train), 1), **metrics,
               "wall_time": time.perf_counter() - start}
        rows.append(row)
        log.info("epoch %d loss %.5f mrr %.4f hits@10 %.4f", epoch, row["loss"], row["mrr"], row["hits@10"])

        h10 = row["hits@10"]
        if best is None or h10 > best * (1.0 + config.min_hits10_gain) or (best == 0 and h10 > 0):
            best, since_best = h10, 0
        else:
            since_best += 1
            if since_best >= config.patience_epochs:
                stopped = True
                break

    if log_path is not None:
        write_log(rows, log_path)
    return TrainResult(params.to_model(), rows, params, stopped)
