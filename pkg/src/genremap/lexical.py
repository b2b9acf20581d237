"""Aggregate tf-idf vectors per category sample, compared by cosine.

A category's vector sums raw term frequencies over all volumes in its
sample (so longer volumes contribute proportionally more), then weights
each term by inverse document frequency computed over the full ingested
corpus. Distance is 1 - cosine; with nonnegative weights this lies in
[0, 1].
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

from .corpus import CorpusIndex
from .matrix import DistanceMatrix
from .sampling import Sample


@dataclass(frozen=True)
class Vocabulary:
    """Tokens ordered by descending document frequency, ties lexicographic."""

    tokens: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def basis_id(self) -> str:
        h = hashlib.sha256()
        for token in self.tokens:
            h.update(token.encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()[:16]

    def truncated(self, top_k: int) -> "Vocabulary":
        return Vocabulary(tokens=self.tokens[:top_k])

    def position_map(self) -> dict[str, int]:
        return {token: i for i, token in enumerate(self.tokens)}


@dataclass
class TermVector:
    weights: dict[str, float]
    basis: str


def build_vocabulary(index: CorpusIndex, top_k: int) -> Vocabulary:
    """Top top_k tokens by document frequency over the whole ingest."""
    if not index.volumes:
        raise ValueError("corpus is empty")
    ordered = sorted(index.document_frequency.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(tokens=tuple(token for token, _ in ordered[:top_k]))


def inverse_document_frequency(index: CorpusIndex, token: str) -> float:
    """Smoothed idf: ln((N+1)/(df+1)) + 1, never zero or negative."""
    n = index.n_volumes
    df = index.document_frequency.get(token, 0)
    return math.log((n + 1) / (df + 1)) + 1.0


def genre_tfidf_vector(index: CorpusIndex, sample: Sample, vocab: Vocabulary
                       ) -> TermVector:
    """Sum term frequencies over the sample and weight by idf."""
    if not sample.volume_ids:
        raise ValueError(f"sample {sample.label!r} is empty")
    in_vocab = set(vocab.tokens)
    tf: dict[str, int] = {}
    for vid in sample.volume_ids:
        for token, count in index.volumes[vid].tokens.items():
            if token in in_vocab:
                tf[token] = tf.get(token, 0) + count
    weights = {
        token: count * inverse_document_frequency(index, token)
        for token, count in sorted(tf.items())
    }
    return TermVector(weights=weights, basis=vocab.basis_id)


def cosine_similarity(u: TermVector, v: TermVector) -> float:
    """Cosine of the angle between two sparse vectors on the same basis."""
    if u.basis != v.basis:
        raise ValueError("vectors are on different vocabulary bases")
    norm_u = math.sqrt(sum(w * w for w in u.weights.values()))
    norm_v = math.sqrt(sum(w * w for w in v.weights.values()))
    if norm_u == 0.0 or norm_v == 0.0:
        raise ValueError("cosine of a zero vector is undefined")
    # fixed summation order keeps the result bit-identical under argument swap
    common = sorted(u.weights.keys() & v.weights.keys())
    dot = sum(u.weights[token] * v.weights[token] for token in common)
    return dot / (norm_u * norm_v)


def tfidf_distance_matrix(index: CorpusIndex, samples: dict,
                          vocab: Vocabulary) -> DistanceMatrix:
    """1 - cosine between category tf-idf vectors; method tag "tfidf"."""
    labels = sorted(samples)
    vectors = {label: genre_tfidf_vector(index, samples[label], vocab)
               for label in labels}
    pair_values = {}
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            pair_values[(a, b)] = 1.0 - cosine_similarity(vectors[a], vectors[b])
    return DistanceMatrix.from_pairs(labels, pair_values, method="tfidf")
