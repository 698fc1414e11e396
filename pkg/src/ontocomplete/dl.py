"""Description-logic rules: concept AST, line parser, serializer and a
structural subsumption checker.

Surface syntax (one rule per line, ``#`` starts a comment)::

    rule    := concept "SubClassOf" concept
    concept := term ("and" term)*
    term    := NAME | NAME "some" term | "(" concept ")" | "Nothing"

``Nothing`` is only legal as the complete head of a rule.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Union

__all__ = [
    "Atomic", "Slot", "Exists", "And", "Bottom", "BOTTOM", "Concept", "Rule",
    "Ontology", "DLSyntaxError", "conjoin", "canonical", "concept_text",
    "parse_concept", "parse_rule", "serialize_rule", "load_rules", "write_rules",
    "atoms", "occurrences", "replace_at", "substitute", "Entailment", "entails",
]

NAME_RE = re.compile(r"[A-Za-z0-9_-]+\Z")
KEYWORDS = {"and", "some", "SubClassOf", "Nothing"}
UNSUPPORTED = {"or", "not", "only", "min", "max", "exactly", "value",
               "inverse", "SubPropertyOf", "EquivalentTo"}


class DLSyntaxError(ValueError):
    """Raised for malformed rule text; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int = 0, text: str = ""):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} (at byte {offset})")


@dataclass(frozen=True)
class Atomic:
    name: str

    def __post_init__(self):
        if not NAME_RE.match(self.name) or self.name in KEYWORDS:
            raise ValueError(f"invalid concept name {self.name!r}")


@dataclass(frozen=True)
class Slot:
    """Template placeholder, serialized as ``?X`` / ``?Y``."""

    name: str


@dataclass(frozen=True)
class Exists:
    role: str
    filler: "Concept"

    def __post_init__(self):
        if not NAME_RE.match(self.role) or self.role in KEYWORDS:
            raise ValueError(f"invalid role name {self.role!r}")
        if isinstance(self.filler, _BottomType):
            raise ValueError("Nothing cannot be an existential filler")


@dataclass(frozen=True)
class And:
    parts: tuple

    def __post_init__(self):
        if len(self.parts) < 2:
            raise ValueError("a conjunction needs at least two parts")
        if any(isinstance(p, And) for p in self.parts):
            raise ValueError("conjunctions must be flat; use conjoin()")
        if any(isinstance(p, _BottomType) for p in self.parts):
            raise ValueError("Nothing cannot appear inside a conjunction")


class _BottomType:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Bottom"

    def __reduce__(self):
        return (_BottomType, ())


Bottom = _BottomType
BOTTOM = _BottomType()

Concept = Union[Atomic, Slot, Exists, And, _BottomType]


def conjoin(parts: Iterable[Concept]) -> Concept:
    """Flatten nested conjunctions and drop duplicates, keeping first occurrences."""
    flat: list = []
    for p in parts:
        for q in (p.parts if isinstance(p, And) else (p,)):
            if q not in flat:
                flat.append(q)
    if not flat:
        raise ValueError("empty conjunction")
    return flat[0] if len(flat) == 1 else And(tuple(flat))


def concept_text(c: Concept) -> str:
    if isinstance(c, Atomic):
        return c.name
    if isinstance(c, Slot):
        return "?" + c.name
    if isinstance(c, Exists):
        filler = concept_text(c.filler)
        if isinstance(c.filler, And):
            filler = f"({filler})"
        return f"{c.role} some {filler}"
    if isinstance(c, And):
        return " and ".join(f"({concept_text(p)})" if isinstance(p, Exists) else concept_text(p)
                            for p in c.parts)
    return "Nothing"


@lru_cache(maxsize=200_000)
def canonical(c: Concept) -> Concept:
    """Canonical form: conjunctions flattened, deduplicated and sorted by their text."""
    if isinstance(c, Exists):
        return Exists(c.role, canonical(c.filler))
    if isinstance(c, And):
        parts = conjoin(canonical(p) for p in c.parts)
        if not isinstance(parts, And):
            return parts
        return And(tuple(sorted(parts.parts, key=concept_text)))
    return c


def _contains_bottom(c: Concept) -> bool:
    if isinstance(c, _BottomType):
        return True
    if isinstance(c, Exists):
        return _contains_bottom(c.filler)
    if isinstance(c, And):
        return any(_contains_bottom(p) for p in c.parts)
    return False


@dataclass(frozen=True)
class Rule:
    """A concept inclusion ``body SubClassOf head``.

    ``body`` and ``head`` are always canonical, so equality and hashing ignore
    conjunct order. ``written`` keeps the conjunct order of the source text; it
    is only used for display and verbalization.
    """

    body: Concept
    head: Concept
    written: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if isinstance(self.body, _BottomType):
            raise ValueError("rule body cannot be Nothing")
        if _contains_bottom(self.body) or (
                not isinstance(self.head, _BottomType) and _contains_bottom(self.head)):
            raise ValueError("Nothing is only allowed as the complete head")
        if self.written is None:
            object.__setattr__(self, "written", (self.body, self.head))
        object.__setattr__(self, "body", canonical(self.body))
        object.__setattr__(self, "head", canonical(self.head))

    @property
    def id(self) -> str:
        return f"{concept_text(self.body)} SubClassOf {concept_text(self.head)}"

    @property
    def is_atomic(self) -> bool:
        """True for a bare subsumption ``A SubClassOf B`` between concept names."""
        return isinstance(self.body, Atomic) and isinstance(self.head, Atomic)

    def __str__(self):
        return self.id


# --------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(r"\s*(?:(\()|(\))|(\?[A-Za-z]+)|([A-Za-z0-9_-]+)|(\S))")


def _tokenize(text: str, allow_slots: bool) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    raw = text.encode("utf-8")
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:  # only trailing whitespace left
            break
        start = len(text[:m.start(m.lastindex)].encode("utf-8"))
        lpar, rpar, slot, name, other = m.groups()
        if lpar:
            tokens.append(("(", lpar, start))
        elif rpar:
            tokens.append((")", rpar, start))
        elif slot:
            if not allow_slots:
                raise DLSyntaxError(f"placeholder {slot!r} not allowed here", start, text)
            tokens.append(("SLOT", slot[1:], start))
        elif name:
            kind = name if name in KEYWORDS else "NAME"
            if name in UNSUPPORTED:
                raise DLSyntaxError(f"unsupported constructor {name!r}", start, text)
            tokens.append((kind, name, start))
        else:
            raise DLSyntaxError(f"unexpected character {other!r}", start, text)
        pos = m.end()
    tokens.append(("EOF", "", len(raw)))
    return tokens


class _Parser:
    def __init__(self, text: str, allow_slots: bool = False):
        self.text = text
        self.tokens = _tokenize(text, allow_slots)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind: str):
        tok = self.tokens[self.i]
        if tok[0] != kind:
            want = "end of line" if kind == "EOF" else repr(kind)
            got = "end of line" if tok[0] == "EOF" else repr(tok[1])
            raise DLSyntaxError(f"expected {want}, found {got}", tok[2], self.text)
        self.i += 1
        return tok

    def concept(self) -> Concept:
        offsets = [self.peek()[2]]
        parts = [self.term()]
        while self.peek()[0] == "and":
            self.i += 1
            offsets.append(self.peek()[2])
            parts.append(self.term())
        if len(parts) == 1:
            return parts[0]
        for part, offset in zip(parts, offsets):
            if isinstance(part, _BottomType):
                raise DLSyntaxError("Nothing cannot appear inside a conjunction", offset, self.text)
        return conjoin(parts)

    def term(self) -> Concept:
        kind, value, offset = self.peek()
        if kind == "Nothing":
            self.i += 1
            return BOTTOM
        if kind == "(":
            self.i += 1
            inner = self.concept()
            self.take(")")
            return inner
        if kind == "SLOT":
            self.i += 1
            return Slot(value)
        if kind == "NAME":
            self.i += 1
            if self.peek()[0] == "some":
                self.i += 1
                filler_offset = self.peek()[2]
                filler = self.term()
                if isinstance(filler, _BottomType):
                    raise DLSyntaxError("Nothing cannot be an existential filler",
                                        filler_offset, self.text)
                return Exists(value, filler)
            return Atomic(value)
        got = "end of line" if kind == "EOF" else repr(value)
        raise DLSyntaxError(f"expected a concept, found {got}", offset, self.text)


def parse_concept(text: str, allow_slots: bool = False) -> Concept:
    p = _Parser(text, allow_slots)
    c = p.concept()
    p.take("EOF")
    return c


def parse_rule(text: str, allow_slots: bool = False) -> Rule:
    """Parse one rule line. Raises :class:`DLSyntaxError` on malformed input."""
    p = _Parser(text, allow_slots)
    body_offset = p.peek()[2]
    body = p.concept()
    p.take("SubClassOf")
    head_offset = p.peek()[2]
    head = p.concept()
    p.take("EOF")
    if isinstance(body, _BottomType):
        raise DLSyntaxError("empty body: Nothing cannot be the left-hand side", body_offset, text)
    if _contains_bottom(body):
        raise DLSyntaxError("Nothing is only allowed as the complete head", body_offset, text)
    if not isinstance(head, _BottomType) and _contains_bottom(head):
        raise DLSyntaxError("Nothing is only allowed as the complete head", head_offset, text)
    return Rule(body, head, written=(body, head))


def serialize_rule(rule: Rule) -> str:
    return rule.id


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def iter_rules(lines: Iterable[str]) -> Iterator[Rule]:
    for lineno, line in enumerate(lines, 1):
        text = _strip_comment(line)
        if not text:
            continue
        try:
            yield parse_rule(text)
        except DLSyntaxError as exc:
            raise DLSyntaxError(f"line {lineno}: {exc.args[0]}", exc.offset, text) from None


def load_rules(path: str | Path) -> list[Rule]:
    with open(path, encoding="utf-8") as fh:
        return list(iter_rules(fh))


def write_rules(rules: Iterable[Rule], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rules:
            fh.write(r.id + "\n")


# --------------------------------------------------------------------------
# structure helpers

Path_ = tuple


def occurrences(rule: Rule) -> list[tuple[Path_, str]]:
    """Atomic-concept leaf positions of ``rule`` in canonical traversal order.

    A path starts with 0 (body) or 1 (head); then one index per And part, and 0
    for stepping into an existential filler.
    """
    out: list = []

    def walk(c, path):
        if isinstance(c, Atomic):
            out.append((path, c.name))
        elif isinstance(c, Exists):
            walk(c.filler, path + (0,))
        elif isinstance(c, And):
            for i, p in enumerate(c.parts):
                walk(p, path + (i,))

    walk(rule.body, (0,))
    walk(rule.head, (1,))
    return out


def slot_order(rule: Rule) -> list[str]:
    out: list = []

    def walk(c):
        if isinstance(c, Slot):
            out.append(c.name)
        elif isinstance(c, Exists):
            walk(c.filler)
        elif isinstance(c, And):
            for p in c.parts:
                walk(p)

    walk(rule.body)
    walk(rule.head)
    return out


def atoms(c: Concept | Rule) -> set[str]:
    if isinstance(c, Rule):
        return atoms(c.body) | atoms(c.head)
    if isinstance(c, Atomic):
        return {c.name}
    if isinstance(c, Exists):
        return atoms(c.filler)
    if isinstance(c, And):
        return set().union(*(atoms(p) for p in c.parts))
    return set()


def _replace(c: Concept, path: tuple, new: Concept) -> Concept:
    if not path:
        return new
    if isinstance(c, Exists):
        return Exists(c.role, _replace(c.filler, path[1:], new))
    if isinstance(c, And):
        parts = list(c.parts)
        parts[path[0]] = _replace(parts[path[0]], path[1:], new)
        return conjoin(parts)
    raise IndexError(f"path {path} does not address a subconcept")


def replace_at(rule: Rule, paths: dict | tuple, new: Concept | None = None) -> Rule:
    """Replace the leaf at ``paths`` (or each path in a {path: concept} dict)."""
    if not isinstance(paths, dict):
        paths = {paths: new}
    body, head = rule.body, rule.head
    # placeholders never collide with siblings, so earlier replacements keep later paths valid
    for path, concept in paths.items():
        if path[0] == 0:
            body = _replace(body, path[1:], concept)
        else:
            head = _replace(head, path[1:], concept)
    return Rule(body, head)


def _subst(c: Concept, mapping: dict) -> Concept:
    if isinstance(c, Slot):
        return Atomic(mapping[c.name])
    if isinstance(c, Exists):
        return Exists(c.role, _subst(c.filler, mapping))
    if isinstance(c, And):
        return conjoin(_subst(p, mapping) for p in c.parts)
    return c


def substitute(template: Rule, mapping: dict[str, str]) -> Rule:
    """Instantiate placeholders (``{"X": "Biologist"}``) and canonicalize."""
    return Rule(_subst(template.body, mapping), _subst(template.head, mapping))


# --------------------------------------------------------------------------
# ontology


class Ontology:
    """A set of rules with derived concept names and direct parents."""

    def __init__(self, rules: Iterable[Rule] = ()):
        self.rules: dict[str, Rule] = {}
        for r in rules:
            self.rules.setdefault(r.id, r)
        self.direct_parents: dict[str, set[str]] = {}
        names: set[str] = set()
        for r in self.rules.values():
            names |= atoms(r)
            if r.is_atomic:
                self.direct_parents.setdefault(r.body.name, set()).add(r.head.name)
        self.atomic_concepts = sorted(names)

    @classmethod
    def load(cls, path: str | Path) -> "Ontology":
        return cls(load_rules(path))

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules.values())

    def __contains__(self, rule):
        key = rule.id if isinstance(rule, Rule) else rule
        return key in self.rules

    def parents(self, name: str) -> set[str]:
        return self.direct_parents.get(name, set())


# --------------------------------------------------------------------------
# structural entailment


class Entailment:
    """Structural subsumption over a fixed set of positive rules.

    The calculus: told rules, reflexivity, transitivity, conjunction
    elimination (``C ⊓ D ⊑ C``), conjunction introduction (``C ⊑ D`` and
    ``C ⊑ E`` give ``C ⊑ D ⊓ E``) and existential monotonicity (``C ⊑ D``
    gives ``∃r.C ⊑ ∃r.D``). The closure over the concepts occurring in the
    positives is saturated once; queries about other concepts are answered
    by structural decomposition against it. No ⊤ or ⊥ reasoning, so this
    under-approximates DL entailment.
    """

    def __init__(self, positives: Iterable[Rule]):
        positives = list(positives)
        universe: set = set()
        for r in positives:
            _subconcepts(r.body, universe)
            _subconcepts(r.head, universe)
        self.universe = universe
        self._conj = [c for c in universe if isinstance(c, And)]
        self._exists: dict[str, list] = {}
        for c in universe:
            if isinstance(c, Exists):
                self._exists.setdefault(c.role, []).append(c)
        up: dict = {c: {c} for c in universe}
        for r in positives:
            up[r.body].add(r.head)
        for c in self._conj:
            up[c].update(c.parts)
        changed = True
        while changed:
            changed = False
            for c in universe:
                reach = set(up[c])
                for b in up[c]:
                    reach |= up[b]
                reach |= self._introduce(c, reach, up)
                if len(reach) != len(up[c]):
                    up[c] = reach
                    changed = True
        self._up = {c: frozenset(v) for c, v in up.items()}
        self._memo: dict = {}

    def _introduce(self, c: Concept, reach: set, up: dict) -> set:
        new = {d for d in self._conj if d not in reach and all(p in reach for p in d.parts)}
        if isinstance(c, Exists) and c.filler in up:
            fillers = up[c.filler]
            new |= {e for e in self._exists.get(c.role, ()) if e.filler in fillers}
        return new

    def supers(self, c: Concept) -> frozenset:
        """Concepts of the positives that subsume ``c``."""
        if c in self._up:
            return self._up[c]
        hit = self._memo.get(c)
        if hit is not None:
            return hit
        reach: set = set()
        if isinstance(c, And):
            for p in c.parts:
                reach |= self.supers(p)
        elif isinstance(c, Exists):
            fillers = self.supers(c.filler) | {c.filler}
            reach |= {e for e in self._exists.get(c.role, ()) if e.filler in fillers}
        while True:
            grown = set(reach)
            for b in reach:
                grown |= self._up[b]
            grown |= self._introduce(c, grown, self._up)
            if len(grown) == len(reach):
                break
            reach = grown
        hit = frozenset(reach)
        self._memo[c] = hit
        return hit

    def ancestors(self, name: str) -> frozenset:
        """Atomic concepts subsuming ``name`` (including itself)."""
        return frozenset({name} | {c.name for c in self.supers(Atomic(name))
                                   if isinstance(c, Atomic)})

    def subsumes(self, sub: Concept, sup: Concept) -> bool:
        if sub == sup:
            return True
        if sup in self.universe:
            if sup in self.supers(sub):
                return True
        if isinstance(sup, And):
            return all(self.subsumes(sub, p) for p in sup.parts)
        if isinstance(sub, And) and any(self.subsumes(p, sup) for p in sub.parts):
            return True
        if isinstance(sup, Exists):
            candidates = [sub] + [e for e in self.supers(sub) if isinstance(e, Exists)]
            return any(isinstance(e, Exists) and e.role == sup.role
                       and self.subsumes(e.filler, sup.filler) for e in candidates)
        return False

    def __call__(self, rule: Rule) -> bool:
        return self.subsumes(rule.body, rule.head)


def _subconcepts(c: Concept, out: set) -> set:
    out.add(c)
    if isinstance(c, Exists):
        _subconcepts(c.filler, out)
    elif isinstance(c, And):
        for p in c.parts:
            _subconcepts(p, out)
    return out


def entails(positives: Iterable[Rule], candidate: Rule) -> bool:
    """One-off check; build an :class:`Entailment` when testing many candidates."""
    return Entailment(positives)(candidate)
