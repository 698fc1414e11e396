"""Concept co-occurrence graph with embedding features."""

from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter
from pathlib import Path
from typing import Iterable

import numpy as np

from .dl import Rule, atoms
from .embeddings import EmbeddingStore, resolve

__all__ = ["ConceptGraph", "build_graph"]

log = logging.getLogger(__name__)


class ConceptGraph:
    """Nodes are concept names (sorted); an undirected edge joins two concepts
    that occur in a common training rule."""

    def __init__(self, nodes: list[str], edges: Iterable[tuple[int, int]], features: np.ndarray):
        self.nodes = list(nodes)
        self.index = {n: i for i, n in enumerate(self.nodes)}
        self.edges = sorted({(min(u, v), max(u, v)) for u, v in edges if u != v})
        self.features = np.asarray(features, dtype=np.float64)
        if self.features.shape[0] != len(self.nodes):
            raise ValueError("one feature row per node required")
        n = len(self.nodes)
        self._adj: list[list[int]] = [[] for _ in range(n)]
        for u, v in self.edges:
            self._adj[u].append(v)
            self._adj[v].append(u)
        for lst in self._adj:
            lst.sort()
        self.adjacency_norm = self._normalize()

    def _normalize(self) -> np.ndarray:
        n = len(self.nodes)
        a = np.eye(n)
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1.0
        deg = a.sum(axis=1)
        return a / np.sqrt(np.outer(deg, deg))

    def __len__(self):
        return len(self.nodes)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def neighborhood(self, node: int) -> list[int]:
        if not 0 <= node < len(self.nodes):
            raise IndexError(f"node index {node} out of range")
        return list(self._adj[node])

    def node_hash(self) -> str:
        return hashlib.sha256("\n".join(self.nodes).encode("utf-8")).hexdigest()

    def to_json(self, path: str | Path) -> None:
        data = {
            "nodes": self.nodes,
            "edges": [list(e) for e in self.edges],
            "features": self.features.tolist(),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(data, fh)

    @classmethod
    def from_json(cls, path: str | Path) -> "ConceptGraph":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        feats = np.array(data["features"], dtype=np.float64).reshape(len(data["nodes"]), -1)
        return cls(data["nodes"], [tuple(e) for e in data["edges"]], feats)


def build_graph(train_rules: Iterable[Rule], store: EmbeddingStore,
                extra_concepts: Iterable[str] = ()) -> ConceptGraph:
    """Nodes: concepts of the training rules plus ``extra_concepts`` (which
    enter as isolated nodes unless they also occur in training)."""
    rules = list(train_rules)
    names = set(extra_concepts)
    for r in rules:
        names |= atoms(r)
    if not names:
        raise ValueError("empty graph: no concepts in training rules or extras")
    nodes = sorted(names)
    index = {n: i for i, n in enumerate(nodes)}
    edges = set()
    for r in rules:
        ids = sorted(index[a] for a in atoms(r))
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                edges.add((ids[i], ids[j]))
    feats = np.zeros((len(nodes), store.dim))
    kinds = Counter()
    for i, name in enumerate(nodes):
        res = resolve(name, store)
        feats[i] = res.vector
        kinds[res.resolution] += 1
    log.info("graph: %d nodes, %d edges, features %s", len(nodes), len(edges), dict(kinds))
    return ConceptGraph(nodes, edges, feats)
