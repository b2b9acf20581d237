"""Topic model over the balanced corpus, and three genre-vector strategies.

The model is fit by collapsed Gibbs sampling with symmetric Dirichlet
priors; document-topic and topic-word distributions are read off the
smoothed final-state counts. The sampler is single-threaded and driven by
an explicit xorshift generator, so a seed pins the result exactly,
independent of library internals or thread count.

Category vectors come in three flavors:

* summed: entrywise sum of the sample's document-topic vectors. Each
  volume contributes unit mass, so books are weighted evenly (unlike the
  tf-idf aggregate, which favors longer volumes).
* symdiff: summed vectors over the symmetric-difference samples of a pair,
  rebuilt per comparison so shared volumes cannot dominate the result.
* time_centered: each volume's vector minus the running average for its
  position on the timeline, isolating how a volume differs from the
  prevailing norm of its period. Centered vectors may be negative, so
  cosine distances can exceed 1.
"""

from __future__ import annotations

import logging
import pickle
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from numba import njit

from .corpus import CategoryLabel, CorpusIndex
from .lexical import Vocabulary
from .matrix import DistanceMatrix
from .sampling import Sample, symmetric_difference_samples
from .seeding import derive_seed

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.1
DEFAULT_BETA = 0.01
DEFAULT_ITERATIONS = 500
DEFAULT_WINDOW_YEARS = 5

_MIX64 = np.uint64(0x2545F4914F6CDD1D)
_DOUBLE_SCALE = 1.0 / 9007199254740992.0  # 2**-53


def load_stopwords() -> frozenset[str]:
    """The fixed English stopword list shipped with the package."""
    text = resources.files("genremap").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


@njit(cache=True)
def _rng_next(state):
    """xorshift64* step; returns a double in [0, 1)."""
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    return float((x * _MIX64) >> np.uint64(11)) * _DOUBLE_SCALE


@njit(cache=True)
def _gibbs_run(doc_ids, word_ids, z, n_dk, n_kw, n_k, alpha, beta, iterations,
               state):
    """Collapsed Gibbs sweeps over all token occurrences, in place."""
    n_topics = n_kw.shape[0]
    vocab_size = n_kw.shape[1]
    vbeta = vocab_size * beta
    prob = np.empty(n_topics, dtype=np.float64)
    for _ in range(iterations):
        for i in range(doc_ids.size):
            d = doc_ids[i]
            w = word_ids[i]
            k = z[i]
            n_dk[d, k] -= 1
            n_kw[k, w] -= 1
            n_k[k] -= 1
            total = 0.0
            for kk in range(n_topics):
                p = (n_kw[kk, w] + beta) / (n_k[kk] + vbeta) * (n_dk[d, kk] + alpha)
                prob[kk] = p
                total += p
            u = _rng_next(state) * total
            acc = 0.0
            new_k = n_topics - 1
            for kk in range(n_topics):
                acc += prob[kk]
                if u < acc:
                    new_k = kk
                    break
            z[i] = new_k
            n_dk[d, new_k] += 1
            n_kw[new_k, w] += 1
            n_k[new_k] += 1


@njit(cache=True)
def _gibbs_init(doc_ids, word_ids, z, n_dk, n_kw, n_k, n_topics, state):
    for i in range(doc_ids.size):
        k = int(_rng_next(state) * n_topics)
        if k >= n_topics:
            k = n_topics - 1
        z[i] = k
        n_dk[doc_ids[i], k] += 1
        n_kw[k, word_ids[i]] += 1
        n_k[k] += 1


def _init_rng_state(seed: int) -> np.ndarray:
    # splitmix64 scramble of the seed; state must never be zero
    x = (int(seed) + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & 0xFFFFFFFFFFFFFFFF
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB & 0xFFFFFFFFFFFFFFFF
    x = x ^ (x >> 31)
    if x == 0:
        x = 0x9E3779B97F4A7C15
    return np.array([x], dtype=np.uint64)


@dataclass
class TopicModel:
    """Fitted LDA state: distributions, hyperparameters, lexicon, seed."""

    n_topics: int
    topic_word: np.ndarray
    doc_topic: dict[str, np.ndarray]
    alpha: float
    beta: float
    iterations: int
    seed: int
    lexicon: Vocabulary
    excluded_volumes: list[str] = field(default_factory=list)

    def save(self, path: str | Path) -> None:
        payload = {
            "format": 1,
            "n_topics": self.n_topics,
            "topic_word": self.topic_word,
            "doc_topic": [(vid, self.doc_topic[vid]) for vid in sorted(self.doc_topic)],
            "alpha": self.alpha,
            "beta": self.beta,
            "iterations": self.iterations,
            "seed": self.seed,
            "lexicon": list(self.lexicon.tokens),
            "excluded_volumes": list(self.excluded_volumes),
        }
        with open(path, "wb") as fh:
            pickle.dump(payload, fh, protocol=4)

    @classmethod
    def load(cls, path: str | Path) -> "TopicModel":
        with open(path, "rb") as fh:
            payload = pickle.load(fh)
        if payload.get("format") != 1:
            raise ValueError(f"unsupported model format in {path}")
        return cls(
            n_topics=payload["n_topics"],
            topic_word=payload["topic_word"],
            doc_topic=dict(payload["doc_topic"]),
            alpha=payload["alpha"],
            beta=payload["beta"],
            iterations=payload["iterations"],
            seed=payload["seed"],
            lexicon=Vocabulary(tokens=tuple(payload["lexicon"])),
            excluded_volumes=payload.get("excluded_volumes", []),
        )


def _build_lexicon(index: CorpusIndex, volume_ids: list[str],
                   stopwords: frozenset[str]) -> Vocabulary:
    df: dict[str, int] = {}
    for vid in volume_ids:
        for token in index.volumes[vid].tokens:
            if token not in stopwords:
                df[token] = df.get(token, 0) + 1
    ordered = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary(tokens=tuple(token for token, _ in ordered))


def fit_lda(index: CorpusIndex, volume_ids: list[str], n_topics: int,
            stopwords: frozenset[str] | None = None,
            alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_BETA,
            iterations: int = DEFAULT_ITERATIONS, seed: int = 0) -> TopicModel:
    """Fit LDA on the given volumes by collapsed Gibbs sampling.

    Volumes with no in-lexicon tokens are excluded with a warning and
    recorded on the model. Deterministic given the seed.
    """
    if n_topics < 1:
        raise ValueError("need at least one topic")
    if stopwords is None:
        stopwords = load_stopwords()
    volume_ids = list(dict.fromkeys(volume_ids))  # dedupe, keep order
    lexicon = _build_lexicon(index, volume_ids, stopwords)
    if lexicon.size == 0:
        raise ValueError("lexicon is empty after stopword removal")
    positions = lexicon.position_map()

    kept: list[str] = []
    excluded: list[str] = []
    doc_chunks: list[np.ndarray] = []
    for vid in volume_ids:
        words: list[int] = []
        for token, count in index.volumes[vid].tokens.items():
            pos = positions.get(token)
            if pos is not None:
                words.extend([pos] * count)
        if not words:
            excluded.append(vid)
            logger.warning("volume %s has no in-lexicon tokens; excluded", vid)
            continue
        doc_chunks.append(np.asarray(words, dtype=np.int32))
        kept.append(vid)
    if not kept:
        raise ValueError("no volumes with in-lexicon tokens")

    doc_ids = np.concatenate([
        np.full(chunk.size, i, dtype=np.int32) for i, chunk in enumerate(doc_chunks)
    ])
    word_ids = np.concatenate(doc_chunks)
    n_docs = len(kept)
    z = np.empty(doc_ids.size, dtype=np.int32)
    n_dk = np.zeros((n_docs, n_topics), dtype=np.int32)
    n_kw = np.zeros((n_topics, lexicon.size), dtype=np.int32)
    n_k = np.zeros(n_topics, dtype=np.int64)
    state = _init_rng_state(seed)
    _gibbs_init(doc_ids, word_ids, z, n_dk, n_kw, n_k, n_topics, state)
    _gibbs_run(doc_ids, word_ids, z, n_dk, n_kw, n_k, float(alpha), float(beta),
               int(iterations), state)

    topic_word = (n_kw + beta) / (n_k[:, None] + lexicon.size * beta)
    doc_lengths = n_dk.sum(axis=1)
    theta = (n_dk + alpha) / (doc_lengths[:, None] + n_topics * alpha)
    doc_topic = {vid: theta[i].copy() for i, vid in enumerate(kept)}
    return TopicModel(
        n_topics=n_topics,
        topic_word=topic_word,
        doc_topic=doc_topic,
        alpha=alpha,
        beta=beta,
        iterations=iterations,
        seed=seed,
        lexicon=lexicon,
        excluded_volumes=excluded,
    )


@dataclass
class GenreTopicVector:
    label: str
    vector: np.ndarray
    strategy: str
    pair_context: tuple[CategoryLabel, CategoryLabel] | None = None

    def __post_init__(self):
        if self.strategy not in ("summed", "symdiff", "time_centered"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.strategy == "symdiff" and self.pair_context is None:
            raise ValueError("symdiff vectors must carry their pair context")


def summed_vector(model: TopicModel, sample: Sample) -> GenreTopicVector:
    """Entrywise sum of the sample's document-topic vectors."""
    if not sample.volume_ids:
        raise ValueError(f"sample {sample.label!r} is empty")
    total = np.zeros(model.n_topics)
    for vid in sample.volume_ids:
        if vid not in model.doc_topic:
            raise KeyError(f"volume {vid!r} was not modeled")
        total += model.doc_topic[vid]
    return GenreTopicVector(label=sample.label, vector=total, strategy="summed")


def symdiff_vectors_from_samples(model: TopicModel, sample_a: Sample,
                                 sample_b: Sample,
                                 pair: tuple[CategoryLabel, CategoryLabel]
                                 ) -> tuple[GenreTopicVector, GenreTopicVector]:
    """Summed vectors over pre-drawn symmetric-difference samples."""
    vec_a = summed_vector(model, sample_a)
    vec_b = summed_vector(model, sample_b)
    vec_a.strategy = vec_b.strategy = "symdiff"
    vec_a.pair_context = vec_b.pair_context = pair
    return vec_a, vec_b


def symdiff_vectors(model: TopicModel, index: CorpusIndex, a: CategoryLabel,
                    b: CategoryLabel, n: int, seed: int
                    ) -> tuple[GenreTopicVector, GenreTopicVector]:
    """Summed vectors over the a-not-b and b-not-a samples for one pair.

    The drawn volumes must already be covered by the model (fit the model
    on all volumes, or draw the pair samples before fitting).
    """
    sample_a, sample_b = symmetric_difference_samples(index, a, b, n, seed)
    return symdiff_vectors_from_samples(model, sample_a, sample_b, (a, b))


def time_center(model: TopicModel, index: CorpusIndex,
                window_years: int = DEFAULT_WINDOW_YEARS) -> dict[str, np.ndarray]:
    """Subtract from each volume the mean vector of its +/-window neighbors.

    The window always contains the volume itself, so the result is defined
    for every modeled volume; a volume alone in its window centers to zero.
    """
    ids = sorted(model.doc_topic)
    years = {vid: index.volumes[vid].year for vid in ids}
    by_year: dict[int, list[str]] = {}
    for vid in ids:
        by_year.setdefault(years[vid], []).append(vid)
    year_sum = {y: np.sum([model.doc_topic[v] for v in vids], axis=0)
                for y, vids in by_year.items()}
    year_count = {y: len(vids) for y, vids in by_year.items()}

    centered: dict[str, np.ndarray] = {}
    mean_cache: dict[int, np.ndarray] = {}
    for vid in ids:
        y = years[vid]
        if y not in mean_cache:
            total = np.zeros(model.n_topics)
            count = 0
            for yy in range(y - window_years, y + window_years + 1):
                if yy in year_sum:
                    total += year_sum[yy]
                    count += year_count[yy]
            mean_cache[y] = total / count
        centered[vid] = model.doc_topic[vid] - mean_cache[y]
    return centered


def centered_vector(model: TopicModel, index: CorpusIndex, sample: Sample,
                    window_years: int = DEFAULT_WINDOW_YEARS,
                    centered: dict[str, np.ndarray] | None = None
                    ) -> GenreTopicVector:
    """Sum of time-centered vectors over the sample's volumes."""
    if centered is None:
        centered = time_center(model, index, window_years)
    total = np.zeros(model.n_topics)
    for vid in sample.volume_ids:
        if vid not in centered:
            raise KeyError(f"volume {vid!r} was not modeled")
        total += centered[vid]
    return GenreTopicVector(label=sample.label, vector=total,
                            strategy="time_centered")


def _dense_cosine(u: np.ndarray, v: np.ndarray, name_u: str, name_v: str) -> float:
    norm_u = float(np.sqrt(np.dot(u, u)))
    norm_v = float(np.sqrt(np.dot(v, v)))
    if norm_u == 0.0:
        raise ValueError(f"category {name_u!r} has a zero topic vector")
    if norm_v == 0.0:
        raise ValueError(f"category {name_v!r} has a zero topic vector")
    return float(np.dot(u, v)) / (norm_u * norm_v)


_METHOD_TAGS = {"summed": "topic-summed", "symdiff": "topic-symdiff",
                "time_centered": "topic-centered"}


def topic_distance_matrix(vectors, strategy: str, labels=None,
                          missing: str = "error") -> DistanceMatrix:
    """1 - cosine between category topic vectors.

    For "summed" and "time_centered", ``vectors`` maps CategoryLabel to
    GenreTopicVector. For "symdiff", it maps an (a, b) label pair to that
    comparison's (vector_a, vector_b); pairs absent from the mapping are
    treated per ``missing`` ("error" or "nan").
    """
    if strategy not in _METHOD_TAGS:
        raise ValueError(f"unknown strategy {strategy!r}")
    method = _METHOD_TAGS[strategy]
    if strategy == "symdiff":
        if labels is None:
            labels = sorted({label for pair in vectors for label in pair})
        pair_values = {}
        for (a, b), (vec_a, vec_b) in vectors.items():
            sim = _dense_cosine(vec_a.vector, vec_b.vector, str(a), str(b))
            pair_values[(a, b)] = 1.0 - sim
        return DistanceMatrix.from_pairs(list(labels), pair_values,
                                         method=method, missing=missing)
    if labels is None:
        labels = sorted(vectors)
    sizes = {vectors[label].vector.size for label in labels}
    if len(sizes) > 1:
        raise ValueError("topic vectors have mismatched dimensions")
    pair_values = {}
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            sim = _dense_cosine(vectors[a].vector, vectors[b].vector, str(a), str(b))
            pair_values[(a, b)] = 1.0 - sim
    return DistanceMatrix.from_pairs(list(labels), pair_values, method=method,
                                     missing=missing)
