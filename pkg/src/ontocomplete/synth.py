"""Planted-structure benchmark: parallel rule families with clustered vectors.

Family ``f`` has a parent class ``Kind{f}``, a flavour ``Flavor{f}``, a place
``Place{f}`` and five members, each contributing two rules::

    Kind{f}Member{i} SubClassOf (hasFlavor some Flavor{f})
    Kind{f}Member{i} and (livesIn some Place{f}) SubClassOf Kind{f}

Every fifth family has four members and instead carries two isolated rules
about ``Rare{f}`` that no template can cover, so the fallback stage has
something to do. Concept vectors combine an orthogonal family direction with
an orthogonal role direction (member, parent, flavour, ...).

The two rule shapes are deliberate. Swap negatives only hit a family's shared
template when the partner rule has the same shape, which keeps those
templates from being swamped by negatives early in training.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dl import And, Atomic, Exists, Rule, write_rules
from .embeddings import EmbeddingStore
from .verbalize import split_name

__all__ = ["SynthSpec", "generate", "write_benchmark"]


@dataclass(frozen=True)
class SynthSpec:
    families: int = 20
    dim: int = 32
    seed: int = 7
    family_weight: float = 2.0
    role_weight: float = 1.0
    noise: float = 0.1


ROLES = ("member", "parent", "flavor", "place", "rare", "curio", "odd")


def _names(f: int) -> dict:
    size = 4 if f % 5 == 0 else 5
    return {
        "parent": f"Kind{f:02d}",
        "members": [f"Kind{f:02d}Member{i}" for i in range(1, size + 1)],
        "flavor": f"Flavor{f:02d}",
        "place": f"Place{f:02d}",
        "rare": (f"Rare{f:02d}", f"Curio{f:02d}", f"Odd{f:02d}"),
    }


def generate(spec: SynthSpec = SynthSpec()) -> tuple[list[Rule], EmbeddingStore]:
    """Rules and vectors. Each vector is its family direction plus its role
    direction plus Gaussian noise; all planted directions are orthonormal."""
    if spec.families + len(ROLES) > spec.dim:
        raise ValueError(f"dim must be at least {spec.families + len(ROLES)}")
    rng = np.random.default_rng(spec.seed)
    basis, _ = np.linalg.qr(rng.normal(size=(spec.dim, spec.dim)))
    role_dir = {r: basis[:, spec.families + i] for i, r in enumerate(ROLES)}
    rules: list[Rule] = []
    vectors: dict[str, np.ndarray] = {}

    def plant(name: str, family: int, role: str):
        vectors[name] = (spec.family_weight * basis[:, family] + spec.role_weight * role_dir[role]
                         + spec.noise * rng.normal(size=spec.dim))

    for f in range(spec.families):
        n = _names(f)
        for m in n["members"]:
            plant(m, f, "member")
        plant(n["parent"], f, "parent")
        plant(n["flavor"], f, "flavor")
        plant(n["place"], f, "place")
        for m in n["members"]:
            rules.append(Rule(Atomic(m), Exists("hasFlavor", Atomic(n["flavor"]))))
            body = And((Atomic(m), Exists("livesIn", Atomic(n["place"]))))
            rules.append(Rule(body, Atomic(n["parent"]), written=(body, Atomic(n["parent"]))))
        if f % 5 == 0:
            rare, curio, odd = n["rare"]
            for name, role in zip(n["rare"], ("rare", "curio", "odd")):
                plant(name, f, role)
            rules.append(Rule(Atomic(rare), Atomic(curio)))
            rules.append(Rule(Atomic(rare), Exists("hasShape", Atomic(odd))))
    tokens = sorted(vectors)
    store = EmbeddingStore(["_".join(w.lower() for w in split_name(t)) for t in tokens],
                           np.array([vectors[t] for t in tokens]))
    return rules, store


def write_benchmark(out_dir: str | Path, spec: SynthSpec = SynthSpec()) -> dict[str, Path]:
    """Write ``ontology.dlr``, ``vectors.txt`` and ``bench.cfg`` to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rules, store = generate(spec)
    paths = {"ontology": out / "ontology.dlr", "vectors": out / "vectors.txt",
             "config": out / "bench.cfg"}
    write_rules(rules, paths["ontology"])
    store.save(paths["vectors"])
    paths["config"].write_text(
        "# synthetic benchmark\n"
        f"seed = {spec.seed}\n"
        "test_fraction = 0.2\n"
        "dev_fraction = 0.1\n"
        "epochs = 200\n"
        "scorer = distmult\n"
        "fallback = truth\n"
        "annotations = truth\n",
        encoding="utf-8")
    return paths
