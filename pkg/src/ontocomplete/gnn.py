"""GCN over the concept graph with per-template scoring heads.

The unary model scores ``conf(t, X) = sigmoid(x . a_t + b_t)``; the binary
model scores ``sigmoid(sum_i x_i m_ti y_i)`` (DistMult, diagonal relation) or
``sigmoid(||y - x - a_t|| - b_t)`` (TransE-style). A rule's probability is the
maximum confidence over its matched template instances, 0 without matches.

Gradients are derived by hand; the max passes gradient to its argmax only.
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dl import Rule
from .graph import ConceptGraph
from .templates import MatchedInstance, TemplateIndex

__all__ = ["Hyper", "TrainConfig", "GnnModel", "Prediction", "Batch", "TrainingError",
           "sigmoid", "forward", "conf_unary", "conf_binary", "rule_probability",
           "bce_loss", "compile_batch", "loss_and_grad", "AdamW", "train",
           "predict_rules", "f1_score"]

log = logging.getLogger(__name__)

EPS = 1e-7
LAYER_CHOICES = (2, 3, 4, 5)
HIDDEN_CHOICES = (8, 16, 32, 64)


class TrainingError(RuntimeError):
    pass


@dataclass
class Hyper:
    mode: str = "ut"            # "ut" (unary templates) or "bt" (binary templates)
    layers: int = 2
    hidden: int = 32
    dropout: float = 0.5
    scorer: str = "distmult"    # binary head: "distmult" or "transe"

    def __post_init__(self):
        if self.mode not in ("ut", "bt"):
            raise ValueError(f"mode must be 'ut' or 'bt', not {self.mode!r}")
        if self.layers not in LAYER_CHOICES:
            raise ValueError(f"layers must be one of {LAYER_CHOICES}")
        if self.hidden not in HIDDEN_CHOICES:
            raise ValueError(f"hidden must be one of {HIDDEN_CHOICES}")
        if self.scorer not in ("distmult", "transe"):
            raise ValueError(f"unknown scorer {self.scorer!r}")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-2
    weight_decay: float = 5e-2
    epochs: int = 200
    seed: int = 0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    threshold: float = 0.5

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning rate must be non-negative")


@dataclass
class Prediction:
    rule_id: str
    probability: float
    provenance: str  # "unary" | "binary" | "fallback" | "no-template"
    template_id: str | None = None


def sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -np.asarray(z, dtype=np.float64)))


# --------------------------------------------------------------------------
# model


@dataclass
class GnnModel:
    hyper: Hyper
    unary_ids: list
    binary_ids: list
    params: dict
    node_hash: str = ""
    in_dim: int = 0
    _pos: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._pos = {tid: i for i, tid in enumerate(self.head_ids)}

    @property
    def head_ids(self) -> list:
        return self.unary_ids if self.hyper.mode == "ut" else self.binary_ids

    def head_position(self, template_id: str) -> int:
        try:
            return self._pos[template_id]
        except KeyError:
            raise KeyError(f"no head for template {template_id!r}") from None

    @classmethod
    def init(cls, hyper: Hyper, in_dim: int, template_ids: Sequence[str],
             rng: np.random.Generator, node_hash: str = "") -> "GnnModel":
        """Glorot-uniform layer weights; heads start at zero."""
        params = {}
        dims = [in_dim] + [hyper.hidden] * hyper.layers
        for layer in range(hyper.layers):
            fan_in, fan_out = dims[layer], dims[layer + 1]
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            params[f"W{layer}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        t, n = len(template_ids), hyper.hidden
        if hyper.mode == "ut":
            params["unary_a"] = np.zeros((t, n))
            params["unary_b"] = np.zeros(t)
        elif hyper.scorer == "distmult":
            params["binary_m"] = np.zeros((t, n))
        else:
            params["binary_a"] = np.zeros((t, n))
            params["binary_b"] = np.zeros(t)
        ids = list(template_ids)
        return cls(hyper, ids if hyper.mode == "ut" else [], ids if hyper.mode == "bt" else [],
                   params, node_hash, in_dim)

    def copy(self) -> "GnnModel":
        return copy.deepcopy(self)

    # -- checkpoint ---------------------------------------------------------

    def to_dict(self) -> dict:
        heads: dict = {}
        p = self.params
        for i, tid in enumerate(self.head_ids):
            if self.hyper.mode == "ut":
                heads[tid] = {"a": p["unary_a"][i].tolist(), "b": float(p["unary_b"][i])}
            elif self.hyper.scorer == "distmult":
                heads[tid] = {"m": p["binary_m"][i].tolist()}
            else:
                heads[tid] = {"a": p["binary_a"][i].tolist(), "b": float(p["binary_b"][i])}
        return {
            "hyper": asdict(self.hyper),
            "in_dim": self.in_dim,
            "node_hash": self.node_hash,
            "layers": [p[f"W{i}"].tolist() for i in range(self.hyper.layers)],
            "heads": heads,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GnnModel":
        hyper = Hyper(**data["hyper"])
        ids = list(data["heads"])
        params = {f"W{i}": np.array(w, dtype=np.float64).reshape(-1, hyper.hidden)
                  for i, w in enumerate(data["layers"])}
        n = hyper.hidden
        heads = data["heads"]
        if hyper.mode == "ut":
            params["unary_a"] = np.array([heads[t]["a"] for t in ids], dtype=np.float64).reshape(-1, n)
            params["unary_b"] = np.array([heads[t]["b"] for t in ids], dtype=np.float64)
        elif hyper.scorer == "distmult":
            params["binary_m"] = np.array([heads[t]["m"] for t in ids], dtype=np.float64).reshape(-1, n)
        else:
            params["binary_a"] = np.array([heads[t]["a"] for t in ids], dtype=np.float64).reshape(-1, n)
            params["binary_b"] = np.array([heads[t]["b"] for t in ids], dtype=np.float64)
        return cls(hyper, ids if hyper.mode == "ut" else [], ids if hyper.mode == "bt" else [],
                   params, data.get("node_hash", ""), data.get("in_dim", 0))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path: str | Path) -> "GnnModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# --------------------------------------------------------------------------
# forward / backward


def _dropout_masks(graph: ConceptGraph, model: GnnModel, rng: np.random.Generator) -> list:
    p = model.hyper.dropout
    masks = []
    width = graph.dim
    for layer in range(model.hyper.layers):
        keep = rng.random((len(graph), width)) >= p
        masks.append(keep / (1.0 - p))
        width = model.hyper.hidden
    return masks


def _forward(params: dict, adj: np.ndarray, feats: np.ndarray, layers: int, masks=None):
    h = feats
    cache = []
    for layer in range(layers):
        if masks is not None:
            h = h * masks[layer]
        s = adj @ h
        z = s @ params[f"W{layer}"]
        cache.append((s, z))
        h = z if layer == layers - 1 else np.maximum(z, 0.0)
    return h, cache


def forward(graph: ConceptGraph, model: GnnModel, training: bool = False,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Final-layer node embeddings. Dropout is only active when ``training``."""
    if graph.dim != model.params["W0"].shape[0]:
        raise ValueError(f"feature dim {graph.dim} does not match model input "
                         f"{model.params['W0'].shape[0]}")
    masks = None
    if training and model.hyper.dropout > 0:
        masks = _dropout_masks(graph, model, rng or np.random.default_rng())
    h, _ = _forward(model.params, graph.adjacency_norm, graph.features, model.hyper.layers, masks)
    return h


def _backward(params: dict, adj: np.ndarray, cache: list, grad_h: np.ndarray,
              layers: int, masks=None) -> dict:
    grads = {}
    g = grad_h
    for layer in reversed(range(layers)):
        s, z = cache[layer]
        if layer != layers - 1:
            g = g * (z > 0)
        w = params[f"W{layer}"]
        grads[f"W{layer}"] = s.T @ g
        if layer == 0:
            break
        g = adj.T @ (g @ w.T)
        if masks is not None:
            g = g * masks[layer]
    return grads


def conf_unary(template_id: str, node: int, h: np.ndarray, model: GnnModel) -> float:
    i = model.head_position(template_id)
    return float(sigmoid(h[node] @ model.params["unary_a"][i] + model.params["unary_b"][i]))


def conf_binary(template_id: str, x: int, y: int, h: np.ndarray, model: GnnModel) -> float:
    i = model.head_position(template_id)
    if model.hyper.scorer == "distmult":
        return float(sigmoid(np.sum(h[x] * model.params["binary_m"][i] * h[y])))
    dist = np.linalg.norm(h[y] - h[x] - model.params["binary_a"][i])
    return float(sigmoid(dist - model.params["binary_b"][i]))


def rule_probability(rule: Rule, matches: Sequence[MatchedInstance], h: np.ndarray,
                     model: GnnModel, graph: ConceptGraph) -> Prediction:
    """Max confidence over the matches this model has heads for."""
    kind = "unary" if model.hyper.mode == "ut" else "binary"
    best, best_key = None, None
    for m in matches:
        if m.kind != kind or m.template_id not in model._pos:
            continue
        if any(f not in graph.index for f in m.fillers):
            continue
        nodes = [graph.index[f] for f in m.fillers]
        c = conf_unary(m.template_id, nodes[0], h, model) if kind == "unary" else \
            conf_binary(m.template_id, nodes[0], nodes[1], h, model)
        key = (m.template_id, m.fillers)
        if best is None or c > best or (c == best and key < best_key):
            best, best_key = c, key
    if best is None:
        return Prediction(rule.id, 0.0, "no-template", None)
    return Prediction(rule.id, best, kind, best_key[0])


def bce_loss(probs, labels) -> float:
    p = np.clip(np.asarray(probs, dtype=np.float64), EPS, 1 - EPS)
    y = np.asarray(labels, dtype=np.float64)
    return float(np.mean(-(y * np.log(p) + (1 - y) * np.log(1 - p))))


# --------------------------------------------------------------------------
# batched scoring


@dataclass
class Batch:
    rule_ids: list
    labels: np.ndarray          # 0/1 per rule (or all zeros when unlabelled)
    owner: np.ndarray           # instance -> rule position, grouped and ascending
    head: np.ndarray            # instance -> head row
    x: np.ndarray
    y: np.ndarray               # -1 for unary instances
    template_ids: list          # per instance, for argmax reporting

    @property
    def size(self) -> int:
        return len(self.rule_ids)

    def matched(self) -> np.ndarray:
        has = np.zeros(self.size, dtype=bool)
        has[self.owner] = True
        return has


def compile_batch(rules: Sequence[Rule], labels: Sequence[int] | None, index: TemplateIndex,
                  model: GnnModel, graph: ConceptGraph, matches: dict | None = None) -> Batch:
    """Flatten every usable (rule, template, fillers) instance into arrays.

    Within a rule, instances keep the (template id, fillers) order, so the
    first maximum is the lexicographically smallest template.
    """
    ut = model.hyper.mode == "ut"
    owner, head, xs, ys, tids = [], [], [], [], []
    skipped = 0
    for pos, rule in enumerate(rules):
        found = matches.get(rule.id) if matches is not None else None
        if found is None:
            found = index.match_unary(rule) if ut else index.match_binary(rule)
        for m in found:
            if m.template_id not in model._pos or m.kind != ("unary" if ut else "binary"):
                continue
            if any(f not in graph.index for f in m.fillers):
                skipped += 1
                continue
            owner.append(pos)
            head.append(model._pos[m.template_id])
            xs.append(graph.index[m.fillers[0]])
            ys.append(graph.index[m.fillers[1]] if not ut else -1)
            tids.append(m.template_id)
    if skipped:
        log.warning("%d template instances skipped: filler concept not in graph", skipped)
    lab = np.zeros(len(rules)) if labels is None else np.asarray(labels, dtype=np.float64)
    return Batch([r.id for r in rules], lab, np.array(owner, dtype=np.int64),
                 np.array(head, dtype=np.int64), np.array(xs, dtype=np.int64),
                 np.array(ys, dtype=np.int64), tids)


def _logits(params: dict, h: np.ndarray, batch: Batch, hyper: Hyper):
    if hyper.mode == "ut":
        return np.einsum("ij,ij->i", h[batch.x], params["unary_a"][batch.head]) \
            + params["unary_b"][batch.head], None
    hx, hy = h[batch.x], h[batch.y]
    if hyper.scorer == "distmult":
        return np.einsum("ij,ij,ij->i", hx, params["binary_m"][batch.head], hy), None
    v = hy - hx - params["binary_a"][batch.head]
    dist = np.linalg.norm(v, axis=1)
    return dist - params["binary_b"][batch.head], (v, dist)


def _segment_max(conf: np.ndarray, batch: Batch):
    """Per-rule max probability and the instance index achieving it (first wins)."""
    probs = np.zeros(batch.size)
    arg = np.full(batch.size, -1, dtype=np.int64)
    if len(conf) == 0:
        return probs, arg
    starts = np.flatnonzero(np.r_[True, batch.owner[1:] != batch.owner[:-1]])
    seg_max = np.maximum.reduceat(conf, starts)
    rules = batch.owner[starts]
    probs[rules] = seg_max
    is_max = conf == probs[batch.owner]
    _, first = np.unique(batch.owner[is_max], return_index=True)
    arg[rules] = np.flatnonzero(is_max)[first]
    return probs, arg


def score_batch(params: dict, graph: ConceptGraph, batch: Batch, hyper: Hyper, masks=None):
    h, cache = _forward(params, graph.adjacency_norm, graph.features, hyper.layers, masks)
    z, extra = _logits(params, h, batch, hyper)
    conf = sigmoid(z)
    probs, arg = _segment_max(conf, batch)
    return probs, arg, (h, cache, z, extra)


def loss_and_grad(params: dict, graph: ConceptGraph, batch: Batch, hyper: Hyper,
                  masks=None, with_grad: bool = True):
    """Mean clamped BCE over the batch and its gradient for every parameter.

    Positive rules without any match have a constant probability of 0 and are
    left out of the mean.
    """
    probs, arg, (h, cache, z, extra) = score_batch(params, graph, batch, hyper, masks)
    include = (batch.labels == 0) | (arg >= 0)
    n = int(include.sum())
    if n == 0:
        raise TrainingError("no trainable rules: every positive lacks a template match")
    y = batch.labels
    pc = np.clip(probs, EPS, 1 - EPS)
    per_rule = -(y * np.log(pc) + (1 - y) * np.log(1 - pc))
    loss = float(per_rule[include].sum() / n)
    if not with_grad:
        return loss, None, per_rule
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    active = include & (arg >= 0) & (probs > EPS) & (probs < 1 - EPS)
    inst = arg[active]
    gz = (probs[active] - y[active]) / n   # d loss / d logit of the argmax instance
    grad_h = np.zeros_like(h)
    rows = batch.head[inst]
    hx = h[batch.x[inst]]
    if hyper.mode == "ut":
        a = params["unary_a"][rows]
        np.add.at(grads["unary_a"], rows, gz[:, None] * hx)
        np.add.at(grads["unary_b"], rows, gz)
        np.add.at(grad_h, batch.x[inst], gz[:, None] * a)
    elif hyper.scorer == "distmult":
        hy = h[batch.y[inst]]
        m = params["binary_m"][rows]
        np.add.at(grads["binary_m"], rows, gz[:, None] * hx * hy)
        np.add.at(grad_h, batch.x[inst], gz[:, None] * m * hy)
        np.add.at(grad_h, batch.y[inst], gz[:, None] * m * hx)
    else:
        v, dist = extra
        d = dist[inst]
        unit = np.divide(v[inst], d[:, None], out=np.zeros_like(v[inst]), where=d[:, None] > 0)
        g = gz[:, None] * unit
        np.add.at(grad_h, batch.y[inst], g)
        np.add.at(grad_h, batch.x[inst], -g)
        np.add.at(grads["binary_a"], rows, -g)
        np.add.at(grads["binary_b"], rows, -gz)
    grads.update(_backward(params, graph.adjacency_norm, cache, grad_h, hyper.layers, masks))
    return loss, grads, per_rule


# --------------------------------------------------------------------------
# optimisation


class AdamW:
    """Adam with decoupled weight decay, updating the arrays in place."""

    def __init__(self, params: dict, lr=1e-2, betas=(0.9, 0.999), eps=1e-8, weight_decay=5e-2):
        self.lr, self.betas, self.eps, self.weight_decay = lr, betas, eps, weight_decay
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict):
        self.t += 1
        b1, b2 = self.betas
        for k, p in params.items():
            g = grads[k]
            p *= 1.0 - self.lr * self.weight_decay
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1 ** self.t)
            v_hat = self.v[k] / (1 - b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def f1_score(probs, labels, threshold: float = 0.5) -> float:
    pred = np.asarray(probs) >= threshold
    gold = np.asarray(labels) == 1
    tp = int(np.sum(pred & gold))
    fp = int(np.sum(pred & ~gold))
    fn = int(np.sum(~pred & gold))
    return 0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)


def train(graph: ConceptGraph, index: TemplateIndex, train_set: Sequence[tuple[Rule, int]],
          dev_set: Sequence[tuple[Rule, int]], hyper: Hyper,
          config: TrainConfig | None = None) -> tuple[GnnModel, list[dict]]:
    """Full-batch training; returns the parameters of the best dev-F1 epoch
    (earliest on ties) and the per-epoch history."""
    config = config or TrainConfig()
    if not dev_set:
        raise ValueError("dev set must not be empty")
    ids = sorted(index.unary) if hyper.mode == "ut" else sorted(index.binary)
    init_rng = np.random.default_rng(config.seed)
    drop_rng = np.random.default_rng([config.seed, 1])
    model = GnnModel.init(hyper, graph.dim, ids, init_rng, graph.node_hash())

    rules, labels = zip(*train_set)
    batch = compile_batch(rules, labels, index, model, graph)
    dev_rules, dev_labels = zip(*dev_set)
    dev_batch = compile_batch(dev_rules, dev_labels, index, model, graph)
    unmatched = int(np.sum((batch.labels == 1) & ~batch.matched()))
    if unmatched:
        log.info("%d training positives have no %s match and are excluded from the loss",
                 unmatched, hyper.mode)

    opt = AdamW(model.params, config.learning_rate, config.betas, config.eps, config.weight_decay)
    best_f1, best_params, history = -1.0, None, []
    for epoch in range(config.epochs):
        masks = _dropout_masks(graph, model, drop_rng) if hyper.dropout > 0 else None
        loss, grads, per_rule = loss_and_grad(model.params, graph, batch, hyper, masks)
        if not np.isfinite(loss) or any(not np.all(np.isfinite(g)) for g in grads.values()):
            bad = np.flatnonzero(~np.isfinite(per_rule))
            culprit = batch.rule_ids[bad[0]] if len(bad) else "<gradient>"
            raise TrainingError(f"non-finite loss at epoch {epoch} (rule {culprit})")
        opt.step(model.params, grads)
        dev_probs, _, _ = score_batch(model.params, graph, dev_batch, hyper)
        dev_f1 = f1_score(dev_probs, dev_batch.labels, config.threshold)
        history.append({"epoch": epoch, "loss": loss, "dev_f1": dev_f1})
        if dev_f1 > best_f1:
            best_f1 = dev_f1
            best_params = {k: v.copy() for k, v in model.params.items()}
    model.params = best_params
    log.info("%s model: best dev F1 %.4f", hyper.mode, best_f1)
    return model, history


def predict_rules(model: GnnModel, graph: ConceptGraph, index: TemplateIndex,
                  rules: Sequence[Rule], matches: dict | None = None) -> list[Prediction]:
    """Eval-mode predictions with provenance ("unary"/"binary"/"no-template")."""
    if model.node_hash and model.node_hash != graph.node_hash():
        raise ValueError("model was trained on a different graph (node hash mismatch)")
    batch = compile_batch(rules, None, index, model, graph, matches)
    probs, arg, _ = score_batch(model.params, graph, batch, model.hyper)
    kind = "unary" if model.hyper.mode == "ut" else "binary"
    out = []
    for i, rid in enumerate(batch.rule_ids):
        if arg[i] < 0:
            out.append(Prediction(rid, 0.0, "no-template", None))
        else:
            out.append(Prediction(rid, float(probs[i]), kind, batch.template_ids[arg[i]]))
    return out
