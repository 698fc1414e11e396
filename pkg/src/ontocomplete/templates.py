"""Rule templates: extraction from training rules, indexing and matching.

A unary template replaces one atomic-concept occurrence of a rule by ``?X``;
a binary template replaces two occurrences by ``?X`` and ``?Y``. Bare
subsumptions ``A SubClassOf B`` would only give the trivial ``?X SubClassOf ?Y``,
so they produce *typed* templates ``?X and A' SubClassOf ?Y and B'`` instead,
one for each pair of direct parents ``A'`` of ``A`` and ``B'`` of ``B``.
"""

from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from pathlib import Path
from typing import Iterable

from .dl import (And, Atomic, Exists, Ontology, Rule, Slot, atoms, canonical,
                 conjoin, occurrences, parse_rule, replace_at, slot_order,
                 substitute)

__all__ = ["Template", "MatchedInstance", "TemplateIndex", "extract_unary",
           "extract_binary", "generalizations"]

log = logging.getLogger(__name__)

X, Y = Slot("X"), Slot("Y")


@dataclass(frozen=True)
class Template:
    pattern: Rule
    kind: str  # "unary" or "binary"
    guards: tuple | None = None  # (A', B') for typed binary templates

    @property
    def id(self) -> str:
        return self.pattern.id

    @property
    def typed(self) -> bool:
        return self.guards is not None

    def instantiate(self, *fillers: str) -> Rule:
        return substitute(self.pattern, dict(zip("XY", fillers)))


@dataclass(frozen=True, order=True)
class MatchedInstance:
    template_id: str
    fillers: tuple
    kind: str = "unary"
    typed: bool = False


def typed_template(parent_x: str, parent_y: str) -> Template:
    pattern = Rule(And((X, Atomic(parent_x))), And((Y, Atomic(parent_y))))
    return Template(pattern, "binary", (parent_x, parent_y))


def extract_unary(rule: Rule) -> list[tuple[Template, str]]:
    """One (template, replaced concept) pair per atomic occurrence of ``rule``."""
    return [(Template(replace_at(rule, path, X), "unary"), name)
            for path, name in occurrences(rule)]


def extract_binary(rule: Rule, parents: dict[str, set[str]]) -> list[tuple[Template, tuple]]:
    """Binary template instances witnessed by ``rule``.

    Bare subsumptions yield typed templates; any other rule yields one untyped
    template per unordered pair of occurrences, labelled so that ``?X`` comes
    before ``?Y`` in canonical order (symmetric patterns keep both fillings).
    """
    if rule.is_atomic:
        a, b = rule.body.name, rule.head.name
        out = [(typed_template(pa, pb), (a, b))
               for pa in sorted(parents.get(a, ())) for pb in sorted(parents.get(b, ()))]
        if not out:
            log.debug("no typed templates for %s: a side has no direct parent", rule.id)
        return out

    occ = occurrences(rule)
    out = []
    seen = set()
    for i in range(len(occ)):
        for j in range(i + 1, len(occ)):
            (pi, ni), (pj, nj) = occ[i], occ[j]
            for (px, nx), (py, ny) in (((pi, ni), (pj, nj)), ((pj, nj), (pi, ni))):
                pattern = replace_at(rule, {px: X, py: Y})
                if isinstance(pattern.body, Slot) and isinstance(pattern.head, Slot):
                    continue
                if slot_order(pattern) != ["X", "Y"]:
                    continue
                key = (pattern.id, (nx, ny))
                if key not in seen:
                    seen.add(key)
                    out.append((Template(pattern, "binary"), (nx, ny)))
    return out


# --------------------------------------------------------------------------
# reverse generalization: every canonical pattern that instantiates to a rule


def _non_conj(t, slots: frozenset, sigma: tuple) -> list:
    """Non-conjunction patterns whose instantiation canonicalizes to ``t``."""
    if not slots:
        return [t]
    binding = dict(sigma)
    if isinstance(t, Atomic) and len(slots) == 1:
        (s,) = slots
        return [Slot(s)] if binding[s] == t.name else []
    if isinstance(t, Exists):
        return [Exists(t.role, g) for g in _general(t.filler, slots, sigma)]
    return []


def _groups(p, slots: frozenset, sigma: tuple) -> list[list]:
    # sets of distinct conjuncts that all collapse onto ``p`` and together
    # contain exactly ``slots``; at most one of them (``p`` itself) is slot-free
    if not slots:
        return [[p]]
    out = []
    for n in _non_conj(p, slots, sigma):
        out += [[n], [p, n]]
    if len(slots) == 2:
        sx, sy = sorted(slots)
        for nx in _non_conj(p, frozenset({sx}), sigma):
            for ny in _non_conj(p, frozenset({sy}), sigma):
                out += [[nx, ny], [p, nx, ny]]
    return out


@lru_cache(maxsize=100_000)
def _general(t, slots: frozenset, sigma: tuple) -> frozenset:
    parts = t.parts if isinstance(t, And) else (t,)
    ordered = sorted(slots)
    found = set()
    for assignment in product(range(len(parts)), repeat=len(ordered)):
        per_part = [frozenset(s for s, k in zip(ordered, assignment) if k == j)
                    for j in range(len(parts))]
        for combo in product(*(_groups(p, b, sigma) for p, b in zip(parts, per_part))):
            terms = [q for g in combo for q in g]
            found.add(canonical(conjoin(terms)))
    return frozenset(found)


def generalizations(rule: Rule, binding: dict[str, str]) -> set[Rule]:
    """All canonical patterns ``p`` with ``substitute(p, binding) == rule``.

    Each placeholder in ``binding`` occurs exactly once in every pattern.
    Besides replacing a leaf, this covers patterns where the placeholder
    sits in an extra conjunct that collapses onto an existing one after
    substitution (``?X and A SubClassOf B`` with ``X = A``).
    """
    sigma = tuple(sorted(binding.items()))
    names = sorted(binding)
    out = set()
    for side in product((0, 1), repeat=len(names)):
        body_slots = frozenset(n for n, s in zip(names, side) if s == 0)
        head_slots = frozenset(n for n, s in zip(names, side) if s == 1)
        for b in _general(rule.body, body_slots, sigma):
            for h in _general(rule.head, head_slots, sigma):
                try:
                    pattern = Rule(b, h)
                except ValueError:
                    continue
                if substitute(pattern, binding) == rule:
                    out.add(pattern)
    return out


# --------------------------------------------------------------------------
# index


class TemplateIndex:
    """Witnessed templates of a training set, plus the direct-parent map
    needed to match typed templates against unseen bare subsumptions."""

    def __init__(self, parents: dict[str, set[str]] | None = None):
        self.unary: dict[str, Template] = {}
        self.binary: dict[str, Template] = {}
        self.witnesses: dict[str, int] = defaultdict(int)
        self.per_concept: dict[str, set] = defaultdict(set)
        self.parents: dict[str, set[str]] = {k: set(v) for k, v in (parents or {}).items()}
        self._typed_by_guard: dict[tuple, str] = {}

    @classmethod
    def build(cls, rules: Iterable[Rule], binary: bool = True) -> "TemplateIndex":
        onto = rules if isinstance(rules, Ontology) else Ontology(rules)
        index = cls(onto.direct_parents)
        for rule in onto:
            index.add_rule(rule, binary=binary)
        return index

    def _register(self, template: Template):
        table = self.unary if template.kind == "unary" else self.binary
        table.setdefault(template.id, template)
        if template.typed:
            self._typed_by_guard[template.guards] = template.id

    def add_rule(self, rule: Rule, binary: bool = True):
        witnessed = set()
        for t, name in extract_unary(rule):
            self._register(t)
            witnessed.add(t.id)
            self.per_concept[name].add((t.id, "X"))
        if binary:
            for t, (nx, ny) in extract_binary(rule, self.parents):
                self._register(t)
                witnessed.add(t.id)
                self.per_concept[nx].add((t.id, "X"))
                self.per_concept[ny].add((t.id, "Y"))
        for tid in witnessed:
            self.witnesses[tid] += 1

    def __len__(self):
        return len(self.unary) + len(self.binary)

    def get(self, template_id: str) -> Template:
        return self.unary.get(template_id) or self.binary[template_id]

    # -- matching -----------------------------------------------------------

    def match_unary(self, rule: Rule) -> list[MatchedInstance]:
        found = set()
        if self.unary:
            for name in atoms(rule):
                for p in generalizations(rule, {"X": name}):
                    if p.id in self.unary:
                        found.add(MatchedInstance(p.id, (name,), "unary"))
        return sorted(found)

    def match_binary(self, rule: Rule) -> list[MatchedInstance]:
        found = set()
        if not self.binary:
            return []
        names = sorted(atoms(rule))
        for nx in names:
            for ny in names:
                for p in generalizations(rule, {"X": nx, "Y": ny}):
                    t = self.binary.get(p.id)
                    if t is not None:
                        found.add(MatchedInstance(p.id, (nx, ny), "binary", t.typed))
        if rule.is_atomic and self._typed_by_guard:
            c, d = rule.body.name, rule.head.name
            for pa in self.parents.get(c, ()):
                for pb in self.parents.get(d, ()):
                    tid = self._typed_by_guard.get((pa, pb))
                    if tid is not None:
                        found.add(MatchedInstance(tid, (c, d), "binary", True))
        return sorted(found)

    def match(self, rule: Rule) -> list[MatchedInstance]:
        return sorted(self.match_unary(rule) + self.match_binary(rule))

    # -- persistence --------------------------------------------------------

    def to_tsv(self, path: str | Path):
        """Columns ``kind, id, witnesses``; ``parent`` rows carry the taxonomy
        used for typed matching."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(["kind", "id", "witnesses"])
            for tid in sorted(self.unary):
                w.writerow(["unary", tid, self.witnesses[tid]])
            for tid in sorted(self.binary):
                kind = "typed" if self.binary[tid].typed else "binary"
                w.writerow([kind, tid, self.witnesses[tid]])
            for child in sorted(self.parents):
                for parent in sorted(self.parents[child]):
                    w.writerow(["parent", f"{child} SubClassOf {parent}", 1])

    @classmethod
    def from_tsv(cls, path: str | Path) -> "TemplateIndex":
        index = cls()
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh, delimiter="\t"))
        for kind, tid, count in rows[1:]:
            if kind == "parent":
                r = parse_rule(tid)
                index.parents.setdefault(r.body.name, set()).add(r.head.name)
                continue
            pattern = parse_rule(tid, allow_slots=True)
            if kind == "typed":
                gx = [p for p in pattern.body.parts if isinstance(p, Atomic)][0].name
                gy = [p for p in pattern.head.parts if isinstance(p, Atomic)][0].name
                t = Template(pattern, "binary", (gx, gy))
            else:
                t = Template(pattern, kind)
            index._register(t)
            index.witnesses[t.id] = int(count)
        return index
