"""Metrics and end-to-end benchmark orchestration."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .dl import Entailment, Ontology, Rule, load_rules
from .embeddings import EmbeddingStore
from .gnn import GnnModel, Hyper, TrainConfig, train
from .graph import ConceptGraph, build_graph
from .hybrid import HttpClient, HybridPredictor, MockClient
from .negatives import (LabeledRule, SplitSpec, finalize_annotations,
                        gen_hard_negative_candidates, gen_training_negatives,
                        read_worksheet, split)
from .templates import TemplateIndex
from .verbalize import verbalize_rule

__all__ = ["Scores", "f1", "sweep_threshold", "BenchConfig", "Dataset", "SystemResult",
           "EvalReport", "prepare", "train_model", "run_benchmark", "compare_scorers", "StageError",
           "SYSTEMS"]

log = logging.getLogger(__name__)

SYSTEMS = ("GCN(UT)", "GCN(BT)", "GCN(UT+BT)", "GCN(UT+BT)+fallback")
PROVENANCES = ("unary", "binary", "fallback", "no-template")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage


# --------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int


def f1(probs: Sequence[float], labels: Sequence[int], threshold: float = 0.5) -> Scores:
    """Positive-class precision, recall and F1 for ``prob >= threshold``."""
    if len(probs) != len(labels):
        raise ValueError(f"length mismatch: {len(probs)} predictions, {len(labels)} labels")
    pred = np.asarray(probs, dtype=np.float64) >= threshold
    gold = np.asarray(labels) == 1
    tp = int(np.sum(pred & gold))
    fp = int(np.sum(pred & ~gold))
    fn = int(np.sum(~pred & gold))
    tn = int(np.sum(~pred & ~gold))
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return Scores(p, r, 2 * p * r / (p + r) if p + r else 0.0, tp, fp, fn, tn)


def sweep_threshold(probs: Sequence[float], labels: Sequence[int]) -> float:
    """Threshold maximizing F1 among 0.5 and the observed scores (0.5 wins ties)."""
    best_t, best = 0.5, f1(probs, labels, 0.5).f1
    for t in sorted(set(float(p) for p in probs)):
        score = f1(probs, labels, t).f1
        if score > best:
            best_t, best = t, score
    return best_t


# --------------------------------------------------------------------------
# configuration


@dataclass
class BenchConfig:
    seed: int = 0
    test_fraction: float = 0.20
    dev_fraction: float = 0.10
    large: bool = False
    layers: int = 2
    hidden: int = 32
    dropout: float = 0.5
    scorer: str = "distmult"
    epochs: int = 200
    learning_rate: float = 1e-2
    weight_decay: float = 5e-2
    threshold: float = 0.5
    tune_threshold: bool = False
    binary: bool = True
    hard_k: int = 5
    annotations: str = "truth"  # "truth" or a finalized worksheet path
    truth: str = ""             # rules file; empty means the ontology itself
    fallback: str = "truth"     # "truth" (mock), "none" or "http"
    prompt_variant: int = 1
    text_path: str = "text"

    @classmethod
    def from_file(cls, path: str | Path) -> "BenchConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        values = {}
        types = {f.name: f.type for f in fields(cls)}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}: line {lineno}: expected key = value")
                key, value = (s.strip() for s in line.split("=", 1))
                if key not in types:
                    raise ValueError(f"{path}: line {lineno}: unknown key {key!r}")
                values[key] = _convert(value, types[key], f"{path}: line {lineno}")
        return cls(**values)

    def override(self, **kwargs) -> "BenchConfig":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update({k: v for k, v in kwargs.items() if v is not None})
        return BenchConfig(**data)

    def lines(self) -> list[str]:
        return [f"{f.name} = {_fmt(getattr(self, f.name))}" for f in fields(self)]

    def hyper(self, mode: str, scorer: str | None = None) -> Hyper:
        return Hyper(mode=mode, layers=self.layers, hidden=self.hidden,
                     dropout=self.dropout, scorer=scorer or self.scorer)

    def train_config(self) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, weight_decay=self.weight_decay,
                           epochs=self.epochs, seed=self.seed, threshold=self.threshold)


def _convert(value: str, typ, where: str):
    typ = typ if isinstance(typ, str) else typ.__name__
    try:
        if typ == "bool":
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return value.lower() in ("true", "1", "yes")
        if typ == "int":
            return int(value)
        if typ == "float":
            return float(value)
    except ValueError:
        raise ValueError(f"{where}: bad {typ} value {value!r}") from None
    return value


def _fmt(v) -> str:
    return str(v).lower() if isinstance(v, bool) else str(v)


# --------------------------------------------------------------------------
# pipeline


@dataclass
class Dataset:
    ontology: Ontology
    store: EmbeddingStore
    train: list            # LabeledRule
    dev: list
    test: list
    index: TemplateIndex
    graph: ConceptGraph
    kappa: float | None = None

    @staticmethod
    def pairs(items: Sequence[LabeledRule]) -> list[tuple[Rule, int]]:
        return [(x.rule, x.label) for x in items]


def _stage(name):
    def wrap(fn):
        def run(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as exc:  # tag and re-raise
                raise StageError(name, exc) from exc
        return run
    return wrap


def _resolve(path: str, base: Path | None) -> Path:
    """Config paths are relative to the config file's directory."""
    p = Path(path)
    return base / p if base is not None and not p.is_absolute() else p


def _truth(config: BenchConfig, onto: Ontology, base: Path | None) -> Entailment:
    if not config.truth:
        return Entailment(onto)
    return Entailment(load_rules(_resolve(config.truth, base)))


def prepare(ontology: str | Path | Ontology, vectors: str | Path | EmbeddingStore,
            config: BenchConfig, base: Path | None = None) -> Dataset:
    onto = _stage("load")(lambda: ontology if isinstance(ontology, Ontology)
                          else Ontology.load(ontology))()
    store = _stage("load")(lambda: vectors if isinstance(vectors, EmbeddingStore)
                           else EmbeddingStore.load(vectors))()
    spec = SplitSpec(0.05 if config.large else config.test_fraction, config.dev_fraction,
                     config.seed)
    sp = _stage("split")(split)(onto, spec)

    @_stage("negatives")
    def negatives():
        concepts = onto.atomic_concepts
        tr = gen_training_negatives(sp.train, concepts, config.seed, protected=sp.dev + sp.test)
        seen = Entailment(sp.train + sp.dev)
        dv = [n for n in gen_training_negatives(sp.dev, concepts, config.seed + 1,
                                                protected=sp.train + sp.test)
              if not seen(n.rule)]
        cands = gen_hard_negative_candidates(sp.test, store, concepts, config.hard_k,
                                             config.seed, protected=list(onto))
        if config.annotations == "truth":
            oracle = _truth(config, onto, base)
            judged = {c.rule.id: ("pos", "pos") if oracle(c.rule) else ("neg", "neg")
                      for c in cands}
        else:
            judged = read_worksheet(_resolve(config.annotations, base))
        te, kappa = finalize_annotations(cands, judged) if cands else ([], None)
        return tr, dv, te, kappa

    tr_neg, dev_neg, test_neg, kappa = negatives()
    pos = lambda rules: [LabeledRule(r, 1) for r in rules]  # noqa: E731
    index = _stage("templates")(TemplateIndex.build)(sp.train, binary=config.binary)
    extra = set(onto.atomic_concepts)
    graph = _stage("graph")(build_graph)(sp.train, store, extra)
    log.info("split: %d/%d/%d positives; negatives %d/%d/%d", len(sp.train), len(sp.dev),
             len(sp.test), len(tr_neg), len(dev_neg), len(test_neg))
    return Dataset(onto, store, pos(sp.train) + tr_neg, pos(sp.dev) + dev_neg,
                   pos(sp.test) + test_neg, index, graph, kappa)


def train_model(data: Dataset, config: BenchConfig, mode: str,
                scorer: str | None = None) -> GnnModel | None:
    if mode == "bt" and not data.index.binary:
        return None
    model, _ = _stage(f"train-{mode}")(train)(data.graph, data.index, Dataset.pairs(data.train),
                                              Dataset.pairs(data.dev),
                                              config.hyper(mode, scorer), config.train_config())
    return model


def _client(config: BenchConfig, data: Dataset, base: Path | None):
    if config.fallback == "none":
        return None
    if config.fallback == "http":
        return HttpClient(text_path=config.text_path)
    if config.fallback == "truth":
        oracle = _truth(config, data.ontology, base)
        rules = [x.rule for x in data.dev + data.test]
        return MockClient({verbalize_rule(r).statement: "True" for r in rules if oracle(r)})
    raise ValueError(f"unknown fallback mode {config.fallback!r}")


@dataclass
class SystemResult:
    scores: Scores
    threshold: float
    provenance: dict = field(default_factory=dict)


@dataclass
class EvalReport:
    systems: dict
    config: list
    seed: int
    stats: dict

    def to_tsv(self) -> str:
        head = ["system", "precision", "recall", "f1", "tp", "fp", "fn", "tn", "threshold",
                *PROVENANCES]
        rows = ["\t".join(head)]
        for name, res in self.systems.items():
            s = res.scores
            rows.append("\t".join([name, f"{s.precision:.6f}", f"{s.recall:.6f}", f"{s.f1:.6f}",
                                   str(s.tp), str(s.fp), str(s.fn), str(s.tn),
                                   f"{res.threshold:.6f}",
                                   *(str(res.provenance.get(p, 0)) for p in PROVENANCES)]))
        return "\n".join(rows) + "\n"

    def to_text(self) -> str:
        out = ["Ontology completion benchmark", ""]
        out += [f"  {k}: {v}" for k, v in self.stats.items()]
        out += ["", f"{'system':<22}{'P':>8}{'R':>8}{'F1':>8}   provenance"]
        for name, res in self.systems.items():
            s = res.scores
            prov = ", ".join(f"{p}={res.provenance.get(p, 0)}" for p in PROVENANCES)
            out.append(f"{name:<22}{100 * s.precision:8.1f}{100 * s.recall:8.1f}"
                       f"{100 * s.f1:8.1f}   {prov}")
        out += ["", "config:"] + [f"  {line}" for line in self.config]
        return "\n".join(out) + "\n"

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.tsv").write_text(self.to_tsv(), encoding="utf-8")
        (out / "report.txt").write_text(self.to_text(), encoding="utf-8")


def _evaluate(predictor: HybridPredictor, data: Dataset, config: BenchConfig) -> SystemResult:
    threshold = config.threshold
    if config.tune_threshold:
        dev = predictor.predict([x.rule for x in data.dev])
        threshold = sweep_threshold([p.probability for p in dev], [x.label for x in data.dev])
    preds = predictor.predict([x.rule for x in data.test])
    scores = f1([p.probability for p in preds], [x.label for x in data.test], threshold)
    prov = Counter(p.provenance for p in preds)
    return SystemResult(scores, threshold, {k: prov.get(k, 0) for k in PROVENANCES})


def run_benchmark(ontology, vectors, config: BenchConfig | None = None,
                  client=None, base: Path | None = None) -> EvalReport:
    """Split, sample negatives, extract templates, build the graph, train the
    unary and binary models, then score the test set with each system."""
    config = config or BenchConfig()
    data = prepare(ontology, vectors, config, base)
    ut = train_model(data, config, "ut")
    bt = train_model(data, config, "bt") if config.binary else None
    fallback = client if client is not None else _client(config, data, base)
    make = lambda u, b, c=None: HybridPredictor(  # noqa: E731
        data.index, data.graph, u, b, c, config.prompt_variant)
    systems = {
        "GCN(UT)": _evaluate(make(ut, None), data, config),
        "GCN(BT)": _evaluate(make(None, bt), data, config),
        "GCN(UT+BT)": _evaluate(make(ut, bt), data, config),
    }
    if fallback is not None:
        systems["GCN(UT+BT)+fallback"] = _stage("predict")(_evaluate)(
            make(ut, bt, fallback), data, config)
    count = lambda items, y: sum(x.label == y for x in items)  # noqa: E731
    stats = {
        "rules": len(data.ontology),
        "train": f"{count(data.train, 1)} pos / {count(data.train, 0)} neg",
        "dev": f"{count(data.dev, 1)} pos / {count(data.dev, 0)} neg",
        "test": f"{count(data.test, 1)} pos / {count(data.test, 0)} neg",
        "templates": f"{len(data.index.unary)} unary / {len(data.index.binary)} binary",
        "graph": f"{len(data.graph)} nodes / {len(data.graph.edges)} edges",
    }
    if data.kappa is not None:
        stats["kappa"] = f"{data.kappa:.4f}"
    return EvalReport(systems, config.lines(), config.seed, stats)


def compare_scorers(ontology, vectors, config: BenchConfig | None = None,
                    base: Path | None = None) -> dict[str, Scores]:
    """Test-set scores of the binary-template model under each scorer."""
    config = config or BenchConfig()
    data = prepare(ontology, vectors, config, base)
    out = {}
    for scorer in ("distmult", "transe"):
        model = train_model(data, config, "bt", scorer)
        out[scorer] = _evaluate(HybridPredictor(data.index, data.graph, None, model),
                                data, config).scores
    return out
