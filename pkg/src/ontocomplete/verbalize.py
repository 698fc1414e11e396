"""Natural-language rendering of concepts and rules.

Two casing conventions are supported because both appear in practice:

* ``"lower"``  -- concept names are lowercased except acronyms
  (``RedWine`` -> ``red wine``, ``UKScientist`` -> ``UK scientist``);
* ``"preserve"`` -- name tokens keep their capitalization
  (``CheninBlanc`` -> ``Chenin Blanc``).

Role names are always rendered in the lower convention
(``hasFlavor`` -> ``has flavor``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .dl import And, Atomic, Exists, Rule, Slot, _BottomType

__all__ = ["split_name", "verbalize_concept", "verbalize_rule", "Verbalization"]

_BOUNDARIES = re.compile(
    r"(?<=[a-z])(?=[A-Z])"          # camelCase
    r"|(?<=[A-Z])(?=[A-Z][a-z])"    # ACRONYMWord
    r"|(?<=[A-Za-z])(?=[0-9])"
    r"|(?<=[0-9])(?=[A-Za-z])"
)

# Roles whose first word is one of these read as a reduced relative clause
# ("something located in X"); everything else takes "that" ("something that has X").
_IRREGULAR_PARTICIPLES = {
    "made", "born", "built", "known", "given", "found", "held", "seen", "written",
    "taken", "grown", "shown", "sold", "bought", "kept", "led", "fed", "bred",
    "won", "drawn", "driven", "eaten", "chosen", "frozen", "broken", "spoken",
    "worn", "grown", "run", "set", "put", "cut", "hit", "spread", "bound", "sent",
}


def split_name(name: str) -> list[str]:
    """Split an identifier on underscores and CamelCase/digit boundaries.

    Hyphens are kept inside their token: ``Ready-To-EatBakeryProduct`` gives
    ``["Ready-To-Eat", "Bakery", "Product"]``.
    """
    tokens = []
    for chunk in name.split("_"):
        if chunk:
            tokens.extend(t for t in _BOUNDARIES.split(chunk) if t)
    return tokens


def _is_acronym(token: str) -> bool:
    letters = [ch for ch in token if ch.isalpha()]
    return len(letters) >= 2 and all(ch.isupper() for ch in letters)


def _words(name: str, casing: str) -> str:
    tokens = split_name(name)
    if casing == "lower":
        tokens = [t if _is_acronym(t) else t.lower() for t in tokens]
    elif casing != "preserve":
        raise ValueError(f"unknown casing {casing!r}")
    return " ".join(tokens)


def _relative_clause(role: str) -> str:
    phrase = _words(role, "lower")
    first = phrase.split(" ", 1)[0].lower()
    if first.endswith("ed") or first in _IRREGULAR_PARTICIPLES:
        return phrase
    return "that " + phrase


def _render(c, casing: str, bottom: str) -> str:
    if isinstance(c, Atomic):
        return _words(c.name, casing)
    if isinstance(c, Slot):
        return "?" + c.name
    if isinstance(c, _BottomType):
        return bottom
    if isinstance(c, Exists):
        return "something " + _clause(c, casing, bottom)
    if isinstance(c, And):
        nouns = [p for p in c.parts if not isinstance(p, Exists)]
        clauses = [_clause(p, casing, bottom) for p in c.parts if isinstance(p, Exists)]
        head = " and ".join(_render(p, casing, bottom) for p in nouns) if nouns else "something"
        if not clauses:
            return head
        return head + " " + " and ".join(clauses)
    raise TypeError(f"cannot verbalize {c!r}")


def _clause(e: Exists, casing: str, bottom: str) -> str:
    return f"{_relative_clause(e.role)} {_render(e.filler, casing, bottom)}"


def verbalize_concept(concept, casing: str = "lower", bottom: str = "contradiction") -> str:
    """Render a concept, e.g. ``Wine and (hasColor some Red)`` -> ``wine that has color red``."""
    return _render(concept, casing, bottom)


@dataclass(frozen=True)
class Verbalization:
    body_text: str
    head_text: str

    @property
    def statement(self) -> str:
        return f"{self.body_text} implies {self.head_text}"


def verbalize_rule(rule: Rule, casing: str = "preserve",
                   bottom: str = "Contradiction") -> Verbalization:
    """Render ``rule`` as ``<body> implies <head>``.

    Conjunctions are rendered in the order they were written, so
    ``TeamEvent and IndividualEvent SubClassOf Nothing`` reads
    ``Team Event and Individual Event implies Contradiction``.
    """
    body, head = rule.written
    return Verbalization(_render(body, casing, bottom), _render(head, casing, bottom))
