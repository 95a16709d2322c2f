"""Word vectors, frequency-weighted sentence embeddings, and emoji vectors.

Sentence embeddings are the weighted token-vector average with weight
a / (a + p(w)), optionally followed by removal of a shared principal
direction fitted once over a reference set of sentence vectors. Emoji
vectors are L2-normalized sums of their description-keyword vectors, so
both live in the word-vector space and compare by cosine.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_SIF_A = 1e-3

_POWER_ITERATION_TOL = 1e-8
_POWER_ITERATION_MAX_STEPS = 10_000


class EmbeddingError(ValueError):
    pass


@dataclass
class WordVectorTable:
    dimension: int
    vectors: dict[str, np.ndarray]

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, word: str) -> np.ndarray | None:
        return self.vectors.get(word)


@dataclass
class SentenceVector:
    vector: np.ndarray
    provenance: str = "sif"  # "sif" or "encoder"


def load_word_vectors(path: str | Path) -> WordVectorTable:
    """Read a text vector file: optional `count dim` header, then
    `word f1 ... fD` lines. The dimension is fixed by the first data line."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    vectors: dict[str, np.ndarray] = {}
    dimension: int | None = None
    start = 0
    if lines:
        head = lines[0].split()
        if len(head) == 2 and all(p.lstrip("-").isdigit() for p in head):
            start = 1

    for lineno, line in enumerate(lines[start:], start + 1):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split(" ")
        word = parts[0]
        try:
            values = np.array([float(p) for p in parts[1:] if p], dtype=np.float64)
        except ValueError:
            raise EmbeddingError(f"line {lineno}: non-numeric vector component") from None
        if values.size == 0:
            raise EmbeddingError(f"line {lineno}: no vector components")
        if dimension is None:
            dimension = values.size
        elif values.size != dimension:
            raise EmbeddingError(
                f"line {lineno}: dimension {values.size} does not match established dimension {dimension}"
            )
        if not np.all(np.isfinite(values)):
            raise EmbeddingError(f"line {lineno}: vector for {word!r} has non-finite components")
        if word in vectors:
            raise EmbeddingError(f"line {lineno}: duplicate word {word!r}")
        vectors[word] = values

    if dimension is None:
        raise EmbeddingError(f"{path}: no vectors found")
    return WordVectorTable(dimension=dimension, vectors=vectors)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; zero-norm inputs are an error so the
    caller can distinguish 'nothing embeddable' from genuine dissimilarity."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise EmbeddingError("cosine is undefined for a zero-norm vector")
    return float(np.dot(u, v) / (nu * nv))


def sif_embed(
    tokens: Sequence[str],
    table: WordVectorTable,
    freqs: Mapping[str, float],
    a: float = DEFAULT_SIF_A,
    principal: np.ndarray | None = None,
) -> SentenceVector:
    """Weighted token-vector average: (1/|S|) sum of a/(a+p(w)) * vec(w).

    |S| counts every input token; tokens absent from the table are skipped
    in the sum. With no embeddable token the result is the zero vector.
    When `principal` u is given, the projection (u.v)u is subtracted.
    """
    if a <= 0:
        raise EmbeddingError(f"smoothing constant a must be positive, got {a}")
    v = np.zeros(table.dimension, dtype=np.float64)
    matched = 0
    for token in tokens:
        vec = table.get(token)
        if vec is None:
            continue
        weight = a / (a + freqs.get(token, 0.0))
        v += weight * vec
        matched += 1
    if matched == 0:
        return SentenceVector(vector=v, provenance="sif")
    v /= len(tokens)
    if principal is not None:
        u = np.asarray(principal, dtype=np.float64)
        v = v - np.dot(u, v) * u
    return SentenceVector(vector=v, provenance="sif")


def fit_principal_component(sentence_vectors: Iterable[SentenceVector | np.ndarray]) -> np.ndarray:
    """Unit-norm dominant direction of the stacked (uncentered) vectors.

    Uses power iteration on the D x D second-moment matrix, converged to
    1e-8. The sign is fixed by making the largest-magnitude component
    positive.
    """
    rows = [sv.vector if isinstance(sv, SentenceVector) else np.asarray(sv, dtype=np.float64) for sv in sentence_vectors]
    if len(rows) < 2:
        raise EmbeddingError("principal component needs at least 2 sentence vectors")
    x = np.stack(rows).astype(np.float64)
    if np.allclose(x, x[0], atol=1e-12):
        raise EmbeddingError("principal component is degenerate: fewer than 2 distinct vectors")

    gram = x.T @ x / len(rows)
    v = np.random.default_rng(0).standard_normal(x.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(_POWER_ITERATION_MAX_STEPS):
        w = gram @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            raise EmbeddingError("principal component is degenerate: zero second-moment matrix")
        w /= norm
        if np.dot(w, v) < 0:
            w = -w
        if np.linalg.norm(w - v) <= _POWER_ITERATION_TOL:
            v = w
            break
        v = w
    idx = int(np.argmax(np.abs(v)))
    if v[idx] < 0:
        v = -v
    return v


def compose_emoji_vector(keywords: Sequence[str], table: WordVectorTable) -> np.ndarray:
    """Sum the keyword vectors found in the table and L2-normalize."""
    if not keywords:
        raise EmbeddingError("keyword list is empty")
    total = np.zeros(table.dimension, dtype=np.float64)
    matched = 0
    for word in keywords:
        vec = table.get(word)
        if vec is not None:
            total += vec
            matched += 1
    if matched == 0:
        raise EmbeddingError(f"none of the keywords {list(keywords)} are in the vector table")
    norm = np.linalg.norm(total)
    if norm == 0.0:
        raise EmbeddingError(f"keywords {list(keywords)} sum to the zero vector")
    return total / norm
