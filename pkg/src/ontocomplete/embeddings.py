"""Pre-trained concept vectors in word2vec text format, name resolution and
cosine-similarity neighbours."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .verbalize import split_name

__all__ = ["EmbeddingStore", "EmbeddingFormatError", "ResolvedFeature", "resolve",
           "top_k_similar", "cosine"]

log = logging.getLogger(__name__)


class EmbeddingFormatError(ValueError):
    pass


class EmbeddingStore:
    """Immutable token -> vector map with cached norms."""

    def __init__(self, tokens: list[str], matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(tokens):
            raise ValueError("matrix must have one row per token")
        self.tokens = list(tokens)
        self.matrix = matrix
        self.matrix.setflags(write=False)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        self.norms = np.linalg.norm(matrix, axis=1)
        self.norms.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def __getitem__(self, token) -> np.ndarray:
        return self.matrix[self.index[token]]

    @classmethod
    def from_dict(cls, vectors: dict[str, Iterable[float]]) -> "EmbeddingStore":
        tokens = list(vectors)
        return cls(tokens, np.array([list(vectors[t]) for t in tokens], dtype=np.float64))

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingStore":
        """Read ``count dim`` header then ``token v1 ... vdim`` lines.

        Duplicate tokens keep their first vector and log a warning.
        """
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2 or not all(h.isdigit() for h in header):
                raise EmbeddingFormatError(f"{path}: line 1: expected header 'count dim'")
            count, dim = int(header[0]), int(header[1])
            if dim <= 0:
                raise EmbeddingFormatError(f"{path}: line 1: dimension must be positive")
            tokens, rows, seen = [], [], set()
            lines = 0
            for lineno, line in enumerate(fh, 2):
                parts = line.rstrip("\n").rstrip(" ").split(" ")
                if parts == [""]:
                    continue
                if len(parts) != dim + 1:
                    raise EmbeddingFormatError(
                        f"{path}: line {lineno}: expected {dim} values, got {len(parts) - 1}")
                lines += 1
                token = parts[0]
                try:
                    values = [float(v) for v in parts[1:]]
                except ValueError:
                    raise EmbeddingFormatError(f"{path}: line {lineno}: non-numeric value") from None
                if token in seen:
                    log.warning("%s: line %d: duplicate token %r ignored", path, lineno, token)
                    continue
                seen.add(token)
                tokens.append(token)
                rows.append(values)
        if lines != count:
            log.warning("%s: header announces %d vectors, found %d", path, count, lines)
        return cls(tokens, np.array(rows, dtype=np.float64).reshape(len(rows), dim))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.tokens)} {self.dim}\n")
            for token, row in zip(self.tokens, self.matrix):
                fh.write(token + " " + " ".join(repr(float(v)) for v in row) + "\n")


@dataclass(frozen=True)
class ResolvedFeature:
    concept: str
    vector: np.ndarray
    resolution: str  # "exact-phrase" | "token-mean" | "zero-oov"


def resolve(name: str, store: EmbeddingStore) -> ResolvedFeature:
    """Map a concept name to a vector: the lowercased underscore-joined phrase,
    else the mean of the word vectors that exist, else zeros."""
    words = [w.lower() for w in split_name(name)]
    phrase = "_".join(words)
    if phrase in store:
        return ResolvedFeature(name, store[phrase].copy(), "exact-phrase")
    known = [store[w] for w in words if w in store]
    if known:
        return ResolvedFeature(name, np.mean(known, axis=0), "token-mean")
    log.info("no embedding for concept %r; using zeros", name)
    return ResolvedFeature(name, np.zeros(store.dim), "zero-oov")


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    return float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))


def top_k_similar(name: str, k: int, store: EmbeddingStore,
                  pool: Iterable[str]) -> list[tuple[str, float]]:
    """The ``k`` pool concepts most cosine-similar to ``name``.

    Ties are broken by name; pool members without a vector are skipped.
    """
    if k < 1:
        raise ValueError("k must be positive")
    query = resolve(name, store)
    qnorm = np.linalg.norm(query.vector)
    if query.resolution == "zero-oov" or qnorm == 0:
        raise ValueError(f"unresolvable query concept {name!r}")
    scored = []
    for other in sorted(set(pool) - {name}):
        vec = resolve(other, store).vector
        norm = np.linalg.norm(vec)
        if norm == 0:
            continue
        scored.append((other, float(np.dot(query.vector, vec) / (qnorm * norm))))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]
