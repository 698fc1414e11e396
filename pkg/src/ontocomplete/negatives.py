"""Train/dev/test splitting, corrupted training negatives, embedding-based
hard negatives and the two-annotator worksheet round trip."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .dl import (BOTTOM, Atomic, Entailment, Ontology, Rule, conjoin, occurrences,
                 parse_rule, replace_at)
from .embeddings import EmbeddingStore, top_k_similar
from .verbalize import verbalize_rule

__all__ = ["LabeledRule", "SplitSpec", "Split", "ORIGINS", "split", "candidate_stream",
           "gen_training_negatives", "gen_hard_negative_candidates", "write_worksheet",
           "read_worksheet", "finalize_annotations", "cohen_kappa", "write_labeled",
           "read_labeled", "AnnotationError"]

log = logging.getLogger(__name__)

ORIGINS = ("ontology", "inversion", "head-swap", "body-swap", "concept-replacement",
           "disjointness", "hard-negative")
LABELS = ("neg", "pos")


class AnnotationError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledRule:
    rule: Rule
    label: int  # 1 positive, 0 negative
    origin: str = "ontology"
    annotations: tuple | None = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")
        if self.label == 1 and self.origin != "ontology":
            raise ValueError("positive rules must originate from the ontology")


# --------------------------------------------------------------------------
# splitting


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.20
    dev_fraction: float = 0.10
    seed: int = 0

    @classmethod
    def large(cls, seed: int = 0, dev_fraction: float = 0.10) -> "SplitSpec":
        return cls(0.05, dev_fraction, seed)

    def __post_init__(self):
        for f in (self.test_fraction, self.dev_fraction):
            if not 0 < f < 1:
                raise ValueError("fractions must lie in (0, 1)")


@dataclass
class Split:
    train: list
    dev: list
    test: list


def _count(fraction: float, n: int) -> int:
    return int(math.floor(fraction * n + 0.5))


def split(rules: Iterable[Rule] | Ontology, spec: SplitSpec = SplitSpec()) -> Split:
    """Seeded uniform split; ``dev_fraction`` applies to the non-test rules."""
    onto = rules if isinstance(rules, Ontology) else Ontology(rules)
    items = sorted(onto, key=lambda r: r.id)
    n = len(items)
    if n < 10:
        raise ValueError(f"need at least 10 rules to split, got {n}")
    n_test = _count(spec.test_fraction, n)
    n_dev = _count(spec.dev_fraction, n - n_test)
    if min(n_test, n_dev, n - n_test - n_dev) < 1:
        raise ValueError(f"fractions give an empty split for {n} rules")
    perm = np.random.default_rng(spec.seed).permutation(n)
    picked = [items[i] for i in perm]
    return Split(train=sorted(picked[n_test + n_dev:], key=lambda r: r.id),
                 dev=sorted(picked[n_test:n_test + n_dev], key=lambda r: r.id),
                 test=sorted(picked[:n_test], key=lambda r: r.id))


# --------------------------------------------------------------------------
# training negatives


def _disjoint(c: Atomic, d: Atomic) -> Rule:
    return Rule(conjoin([c, d]), BOTTOM, written=(conjoin([c, d]), BOTTOM))


def candidate_stream(positives: Sequence[Rule], concepts: Sequence[str],
                     rng: np.random.Generator | None = None,
                     exhaustive: bool = False) -> Iterator[tuple[Rule, str]]:
    """Unfiltered (candidate, origin) pairs from the four corruption strategies.

    With ``exhaustive`` every partner rule and every replacement concept is
    used instead of one random draw.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    pos = list(positives)
    concepts = sorted(set(concepts))
    for i, r in enumerate(pos):
        if r.is_atomic:
            yield Rule(r.head, r.body), "inversion"
        others = [j for j in range(len(pos)) if j != i]
        if others:
            partners = others if exhaustive else [others[int(rng.integers(len(others)))]]
            for j in partners:
                yield Rule(r.body, pos[j].head), "head-swap"
                yield Rule(pos[j].body, r.head), "body-swap"
        if r.is_atomic:
            c, d = r.body.name, r.head.name
            pool = [e for e in concepts if e not in (c, d)]
            if pool:
                if exhaustive:
                    choices = [(side, e) for side in (0, 1) for e in pool]
                else:
                    choices = [(int(rng.integers(2)), pool[int(rng.integers(len(pool)))])]
                for side, e in choices:
                    yield (Rule(Atomic(e), r.head) if side == 0 else Rule(r.body, Atomic(e))), \
                        "concept-replacement"
            yield _disjoint(r.body, r.head), "disjointness"


def gen_training_negatives(positives: Sequence[Rule], concepts: Sequence[str] | None = None,
                           seed: int = 0, protected: Iterable[Rule] = (),
                           exhaustive: bool = False) -> list[LabeledRule]:
    """Corrupted negatives, deduplicated and filtered.

    A candidate is dropped when the training positives entail it or when its
    id equals any positive (training or ``protected``, e.g. dev/test rules).
    """
    positives = list(positives)
    if not positives:
        raise ValueError("training positives must not be empty")
    if concepts is None:
        concepts = Ontology(positives).atomic_concepts
    ent = Entailment(positives)
    blocked = {r.id for r in positives} | {r.id for r in protected}
    seen, out = set(), []
    rng = np.random.default_rng(seed)
    for cand, origin in candidate_stream(positives, concepts, rng, exhaustive):
        if cand.id in seen:
            continue
        seen.add(cand.id)
        if cand.id in blocked or ent(cand):
            continue
        out.append(LabeledRule(cand, 0, origin))
    return out


# --------------------------------------------------------------------------
# hard negatives


def gen_hard_negative_candidates(positives: Sequence[Rule], store: EmbeddingStore,
                                 concepts: Sequence[str], k: int = 5, seed: int = 0,
                                 per_rule: int = 1,
                                 protected: Iterable[Rule] = ()) -> list[LabeledRule]:
    """Replace one random concept occurrence by one of its ``k`` most similar
    ontology concepts. Unannotated; see :func:`finalize_annotations`."""
    rng = np.random.default_rng(seed)
    pool = sorted(set(concepts))
    blocked = {r.id for r in positives} | {r.id for r in protected}
    seen, out = set(), []
    neighbours: dict[str, list] = {}
    for rule in positives:
        occ = occurrences(rule)
        for _ in range(per_rule):
            path, name = occ[int(rng.integers(len(occ)))]
            if name not in neighbours:
                try:
                    neighbours[name] = [c for c, _ in top_k_similar(name, k, store, pool)]
                except ValueError:
                    neighbours[name] = []
            near = neighbours[name]
            if not near:
                log.info("no hard negative for %s: %r has no usable neighbours", rule.id, name)
                continue
            cand = replace_at(rule, path, Atomic(near[int(rng.integers(len(near)))]))
            if cand.id in blocked or cand.id in seen:
                log.debug("hard negative %s collides with a positive or duplicate", cand.id)
                continue
            seen.add(cand.id)
            out.append(LabeledRule(cand, 0, "hard-negative"))
    return out


# --------------------------------------------------------------------------
# annotation


def write_worksheet(candidates: Sequence[LabeledRule], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["rule_id", "statement", "annotator1", "annotator2"])
        for c in candidates:
            w.writerow([c.rule.id, verbalize_rule(c.rule).statement, "", ""])


def read_worksheet(path: str | Path) -> dict[str, tuple[str, str]]:
    """rule id -> (annotator1, annotator2); every cell must be ``neg`` or ``pos``."""
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh, delimiter="\t"))
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) < 4 or not row[2].strip() or not row[3].strip():
            raise AnnotationError(f"{path}: line {lineno}: missing judgment")
        a1, a2 = row[2].strip().lower(), row[3].strip().lower()
        for a in (a1, a2):
            if a not in LABELS:
                raise AnnotationError(f"{path}: line {lineno}: unknown label {a!r}")
        out[row[0]] = (a1, a2)
    return out


def cohen_kappa(pairs: Sequence[tuple[str, str]]) -> float:
    """Cohen's kappa for two raters; 1.0 when chance agreement is already total."""
    if not pairs:
        raise ValueError("no judgments")
    n = len(pairs)
    p_o = sum(a == b for a, b in pairs) / n
    labels = sorted({x for p in pairs for x in p})
    p_e = sum((sum(a == lab for a, _ in pairs) / n) * (sum(b == lab for _, b in pairs) / n)
              for lab in labels)
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1 - p_e)


def finalize_annotations(candidates: Sequence[LabeledRule],
                         judgments: dict[str, tuple[str, str]]) -> tuple[list[LabeledRule], float]:
    """Keep candidates both annotators marked ``neg``; also return kappa."""
    kept, pairs = [], []
    for c in candidates:
        if c.rule.id not in judgments:
            raise AnnotationError(f"missing judgment for {c.rule.id}")
        a = judgments[c.rule.id]
        pairs.append(a)
        if a == ("neg", "neg"):
            kept.append(LabeledRule(c.rule, 0, c.origin, a))
    return kept, cohen_kappa(pairs)


# --------------------------------------------------------------------------
# labelled dataset files


def write_labeled(items: Iterable[LabeledRule], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        for item in items:
            w.writerow([item.rule.id, item.label, item.origin])


def read_labeled(path: str | Path) -> list[LabeledRule]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t"), 1):
            if not row:
                continue
            if len(row) != 3 or row[1] not in ("0", "1"):
                raise ValueError(f"{path}: line {lineno}: expected rule, 0|1, origin")
            out.append(LabeledRule(parse_rule(row[0]), int(row[1]), row[2]))
    return out
