"""Synthetic corpora with known category structure and chronological drift.

Volumes are generated from per-category topic mixtures over a shared
topic-word prior. Ground truth ships with the corpus: the Jensen-Shannon
divergence between the categories' mixture-induced word distributions
(symmetric, bounded, and computable in closed form from the spec), plus
the exact tag co-assignment probabilities implied by the tagging model.

Tagging model: each volume carries category c with base probability
``co_assignment[c][c]``; independently, each pair (a, b) fires a "hybrid"
event with probability ``co_assignment[a][b]`` that adds both tags. With
all off-diagonal entries zero, tags are exactly independent.

Chronology: a volume's word distribution is interpolated toward a separate
late-period distribution by ``drift_rate`` per year past the range start,
so a confound where raw textual distances are dominated by a chronological
gradient can be injected on demand. Optional per-category year centers
place categories in different eras.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import CategoryLabel, CorpusIndex, VolumeRecord
from .matrix import DistanceMatrix
from .seeding import derive_seed


@dataclass
class SynthSpec:
    n_categories: int
    n_volumes: int
    vocab_size: int
    topics_per_category: list[list[float]]
    drift_rate: float
    co_assignment: list[list[float]]
    year_range: tuple[int, int]
    tokens_per_volume: int
    seed: int
    category_names: list[str] | None = None
    year_centers: list[float] | None = None
    year_spread: float = 20.0
    topic_concentration: float = 0.05
    length_sigma: float = 0.0

    def __post_init__(self):
        if self.n_categories < 1 or self.n_volumes < 1:
            raise ValueError("need at least one category and one volume")
        if len(self.topics_per_category) != self.n_categories:
            raise ValueError("one topic mixture per category required")
        widths = {len(row) for row in self.topics_per_category}
        if len(widths) != 1:
            raise ValueError("all topic mixtures must have the same length")
        if self.n_topics < 1:
            raise ValueError("need at least one topic")
        if self.vocab_size < self.n_topics:
            raise ValueError(
                f"vocabulary of {self.vocab_size} is too small for "
                f"{self.n_topics} topics")
        for row in self.topics_per_category:
            if any(w < 0 for w in row) or sum(row) <= 0:
                raise ValueError("mixture weights must be nonnegative, sum > 0")
        co = np.asarray(self.co_assignment, dtype=np.float64)
        if co.shape != (self.n_categories, self.n_categories):
            raise ValueError("co_assignment must be n_categories square")
        if not np.allclose(co, co.T):
            raise ValueError("co_assignment must be symmetric")
        if co.min() < 0 or co.max() > 1:
            raise ValueError("co_assignment entries must lie in [0, 1]")
        if self.year_range[0] >= self.year_range[1]:
            raise ValueError("year_range must be (min, max) with min < max")
        if self.tokens_per_volume < 1:
            raise ValueError("tokens_per_volume must be positive")
        if self.year_centers is not None and \
                len(self.year_centers) != self.n_categories:
            raise ValueError("one year center per category required")
        if self.length_sigma < 0:
            raise ValueError("length_sigma must be nonnegative")
        if self.category_names is not None and \
                len(self.category_names) != self.n_categories:
            raise ValueError("one name per category required")

    @property
    def n_topics(self) -> int:
        return len(self.topics_per_category[0])

    def labels(self) -> list[CategoryLabel]:
        if self.category_names:
            return [CategoryLabel.parse(name) for name in self.category_names]
        kinds = ("genre", "subject")
        return [CategoryLabel(f"Cat{i + 1:02d}", kinds[i % 2])
                for i in range(self.n_categories)]

    def to_json(self) -> dict:
        return {
            "n_categories": self.n_categories,
            "n_volumes": self.n_volumes,
            "vocab_size": self.vocab_size,
            "topics_per_category": self.topics_per_category,
            "drift_rate": self.drift_rate,
            "co_assignment": self.co_assignment,
            "year_range": list(self.year_range),
            "tokens_per_volume": self.tokens_per_volume,
            "seed": self.seed,
            "category_names": self.category_names,
            "year_centers": self.year_centers,
            "year_spread": self.year_spread,
            "topic_concentration": self.topic_concentration,
            "length_sigma": self.length_sigma,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SynthSpec":
        return cls(
            n_categories=int(obj["n_categories"]),
            n_volumes=int(obj["n_volumes"]),
            vocab_size=int(obj["vocab_size"]),
            topics_per_category=[[float(w) for w in row]
                                 for row in obj["topics_per_category"]],
            drift_rate=float(obj["drift_rate"]),
            co_assignment=[[float(w) for w in row]
                           for row in obj["co_assignment"]],
            year_range=(int(obj["year_range"][0]), int(obj["year_range"][1])),
            tokens_per_volume=int(obj["tokens_per_volume"]),
            seed=int(obj["seed"]),
            category_names=obj.get("category_names"),
            year_centers=obj.get("year_centers"),
            year_spread=float(obj.get("year_spread", 20.0)),
            topic_concentration=float(obj.get("topic_concentration", 0.05)),
            length_sigma=float(obj.get("length_sigma", 0.0)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "SynthSpec":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# Closed-form ground truth (recomputable from the spec alone)
# ---------------------------------------------------------------------------

def topic_word_matrix(spec: SynthSpec) -> np.ndarray:
    """The true topic-word distributions, deterministic given the spec seed."""
    rng = np.random.default_rng(derive_seed(spec.seed, "topic-word"))
    alpha = np.full(spec.vocab_size, spec.topic_concentration)
    return rng.dirichlet(alpha, size=spec.n_topics)


def late_period_distribution(spec: SynthSpec) -> np.ndarray:
    """The word distribution that drift interpolates toward."""
    rng = np.random.default_rng(derive_seed(spec.seed, "late-period"))
    return rng.dirichlet(np.full(spec.vocab_size, spec.topic_concentration))


def category_word_distributions(spec: SynthSpec) -> np.ndarray:
    """Mixture-induced word distribution per category, before drift."""
    mixtures = np.asarray(spec.topics_per_category, dtype=np.float64)
    mixtures = mixtures / mixtures.sum(axis=1, keepdims=True)
    return mixtures @ topic_word_matrix(spec)


def jensen_shannon(p: np.ndarray, q: np.ndarray) -> float:
    """JS divergence in nats; 0 for identical distributions, at most ln 2."""
    m = 0.5 * (p + q)

    def half(a):
        mask = a > 0
        return float(np.sum(a[mask] * np.log(a[mask] / m[mask])))

    return 0.5 * half(p) + 0.5 * half(q)


def true_divergence_matrix(spec: SynthSpec) -> DistanceMatrix:
    """Pairwise JS divergence between category word distributions."""
    labels = spec.labels()
    dists = category_word_distributions(spec)
    pair_values = {}
    for i in range(len(labels)):
        for j in range(i + 1, len(labels)):
            pair_values[(labels[i], labels[j])] = jensen_shannon(dists[i], dists[j])
    return DistanceMatrix.from_pairs(labels, pair_values, method="truth-jsd")


def tag_probability_truth(spec: SynthSpec) -> dict:
    """Exact marginal, joint, and pmi values implied by the tagging model."""
    co = np.asarray(spec.co_assignment, dtype=np.float64)
    n = spec.n_categories
    labels = [str(label) for label in spec.labels()]

    def p_no(i):
        out = 1.0 - co[i, i]
        for j in range(n):
            if j != i:
                out *= 1.0 - co[i, j]
        return out

    marginals = {labels[i]: 1.0 - p_no(i) for i in range(n)}
    joints = {}
    pmi = {}
    for i in range(n):
        for j in range(i + 1, n):
            no_both = (1.0 - co[i, i]) * (1.0 - co[j, j]) * (1.0 - co[i, j])
            for k in range(n):
                if k not in (i, j):
                    no_both *= (1.0 - co[i, k]) * (1.0 - co[j, k])
            joint = 1.0 - p_no(i) - p_no(j) + no_both
            key = f"{labels[i]}|{labels[j]}"
            joints[key] = joint
            denom = marginals[labels[i]] * marginals[labels[j]]
            pmi[key] = math.log(joint / denom) if joint > 0 and denom > 0 else None
    return {"marginals": marginals, "joints": joints, "pmi": pmi}


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def _token_names(spec: SynthSpec) -> list[str]:
    width = len(str(spec.vocab_size - 1))
    return [f"w{i:0{width}d}" for i in range(spec.vocab_size)]


def generate_records(spec: SynthSpec) -> list[VolumeRecord]:
    """Deterministically generate all volume records in memory."""
    labels = spec.labels()
    n, k = spec.n_volumes, spec.n_categories
    co = np.asarray(spec.co_assignment, dtype=np.float64)
    rng = np.random.default_rng(derive_seed(spec.seed, "volumes"))

    # tag assignment: base draws, then pairwise hybrid events
    tagged = rng.random((n, k)) < np.diag(co)
    for i in range(k):
        for j in range(i + 1, k):
            if co[i, j] > 0:
                both = rng.random(n) < co[i, j]
                tagged[both, i] = True
                tagged[both, j] = True

    # years: pick one carried tag (or none) and sample that category's era
    pick_u = rng.random(n)
    year_z = rng.standard_normal(n)
    year_u = rng.random(n)
    y_min, y_max = spec.year_range
    years = np.empty(n, dtype=np.int64)
    for v in range(n):
        carried = np.nonzero(tagged[v])[0]
        if spec.year_centers is not None and carried.size:
            chosen = carried[int(pick_u[v] * carried.size)]
            year = round(spec.year_centers[chosen] + spec.year_spread * year_z[v])
        else:
            year = y_min + int(year_u[v] * (y_max - y_min + 1))
        years[v] = min(max(int(year), y_min), y_max)

    cat_dists = category_word_distributions(spec)
    background = cat_dists.mean(axis=0)
    late = late_period_distribution(spec)
    names = _token_names(spec)
    width = len(str(n - 1)) if n > 1 else 1

    # volume lengths: lognormal around the nominal size (sigma 0 = fixed),
    # so aggregate measures that favor long volumes can be stress-tested
    if spec.length_sigma > 0:
        lengths = np.exp(rng.normal(np.log(spec.tokens_per_volume),
                                    spec.length_sigma, size=n))
        lengths = np.clip(np.round(lengths), 1, None).astype(np.int64)
    else:
        lengths = np.full(n, spec.tokens_per_volume, dtype=np.int64)

    records = []
    for v in range(n):
        carried = np.nonzero(tagged[v])[0]
        base = cat_dists[carried].mean(axis=0) if carried.size else background
        lam = min(max(spec.drift_rate * (years[v] - y_min), 0.0), 1.0)
        word_p = (1.0 - lam) * base + lam * late
        counts = rng.multinomial(lengths[v], word_p)
        tokens = {names[i]: int(c) for i, c in enumerate(counts) if c > 0}
        vid = f"v{v:0{width}d}"
        records.append(VolumeRecord(
            volume_id=vid,
            title_key=vid,
            year=int(years[v]),
            tags=frozenset(labels[i] for i in carried),
            tokens=tokens,
        ))
    return records


def build_index(spec: SynthSpec) -> CorpusIndex:
    """Generate the corpus directly into a CorpusIndex (no files)."""
    return CorpusIndex.build(generate_records(spec))


def generate(spec: SynthSpec, out_dir: str | Path) -> dict[str, Path]:
    """Write metadata, feature files, and ground truth under out_dir.

    The outputs are exactly what ingest consumes: metadata.jsonl, one TSV
    per volume under features/, plus truth.json and truth_jsd.csv.
    """
    out_dir = Path(out_dir)
    features_dir = out_dir / "features"
    features_dir.mkdir(parents=True, exist_ok=True)
    records = generate_records(spec)

    metadata_path = out_dir / "metadata.jsonl"
    with open(metadata_path, "w", encoding="utf-8") as meta:
        for rec in records:
            feature_name = f"{rec.volume_id}.tsv"
            with open(features_dir / feature_name, "w", encoding="utf-8") as fh:
                for token, count in sorted(rec.tokens.items()):
                    fh.write(f"{token}\t{count}\n")
            row = {
                "volume_id": rec.volume_id,
                "title_key": rec.title_key,
                "year": rec.year,
                "tags": [{"name": t.name, "kind": t.kind}
                         for t in sorted(rec.tags)],
                "feature_file": feature_name,
            }
            meta.write(json.dumps(row, sort_keys=True) + "\n")

    truth_jsd = true_divergence_matrix(spec)
    truth_csv = out_dir / "truth_jsd.csv"
    truth_jsd.to_csv(truth_csv)
    truth = {
        "categories": [str(label) for label in spec.labels()],
        "jsd": {
            "labels": [str(label) for label in truth_jsd.labels],
            "matrix": truth_jsd.values.tolist(),
        },
        "tags": tag_probability_truth(spec),
        "spec": spec.to_json(),
    }
    truth_path = out_dir / "truth.json"
    truth_path.write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
    return {
        "metadata": metadata_path,
        "features": features_dir,
        "truth": truth_path,
        "truth_jsd": truth_csv,
    }
