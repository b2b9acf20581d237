"""PMI-based social proximity between category labels.

Two categories are socially close when catalogers tend to assign both tags
to the same titles. The strength of that tendency is pointwise mutual
information, estimated inside a normalization sample t whose publication
years match the combined year distribution of the two categories: without
the date matching, categories used in different cataloging eras would look
unrelated no matter how kindred they are. The joint count is smoothed by a
small constant (default 0.1) so zero overlap stays finite: the distance
from a count of zero to a count of one is otherwise enormous in sparse data.

Negating proximity yields the social distance matrix that the textual
measures are evaluated against.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .corpus import CategoryLabel, CorpusIndex
from .matrix import DistanceMatrix
from .sampling import draw_matched_pool
from .seeding import pair_seed

logger = logging.getLogger(__name__)

DEFAULT_SMOOTHING = 0.1
DEFAULT_T_MULTIPLIER = 10


@dataclass(frozen=True)
class ProximityRecord:
    a: CategoryLabel
    b: CategoryLabel
    pmi: float
    joint_count: int
    sample_size: int
    prior_applied: bool = False

    def key(self) -> tuple[str, str]:
        return tuple(sorted((str(self.a), str(self.b))))


@dataclass
class PriorTable:
    """Prior proximity values for selected pairs, blended at a fixed weight."""

    pairs: dict[tuple[str, str], float]
    blend_weight: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.blend_weight <= 1.0:
            raise ValueError("blend_weight must be in [0, 1]")
        self.pairs = {tuple(sorted(k)): v for k, v in self.pairs.items()}

    def get(self, a: CategoryLabel, b: CategoryLabel) -> float | None:
        return self.pairs.get(tuple(sorted((str(a), str(b)))))

    def to_json(self) -> dict:
        return {
            "blend_weight": self.blend_weight,
            "pairs": [{"a": k[0], "b": k[1], "value": v}
                      for k, v in sorted(self.pairs.items())],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PriorTable":
        return cls(
            pairs={(p["a"], p["b"]): float(p["value"]) for p in obj["pairs"]},
            blend_weight=float(obj.get("blend_weight", 0.5)),
        )


def draw_pmi_sample(index: CorpusIndex, a: CategoryLabel, b: CategoryLabel,
                    seed: int, t_multiplier: int = DEFAULT_T_MULTIPLIER
                    ) -> list[str]:
    """Build the normalization sample t for one category pair.

    t contains every volume tagged a or b, plus a date-matched random
    complement of up to t_multiplier x |a union b| volumes (capped by the
    pool). The draw is symmetric in (a, b): both orders produce the same t.
    """
    union = sorted(index.category_volumes(a) | index.category_volumes(b))
    if not union:
        raise ValueError(f"both categories {a} and {b} are empty in the corpus")
    complement = draw_matched_pool(
        index, union, multiplier=t_multiplier,
        seed=pair_seed(seed, a, b),
    )
    return union + complement


def compute_pmi(index: CorpusIndex, a: CategoryLabel, b: CategoryLabel,
                seed: int, smoothing: float = DEFAULT_SMOOTHING,
                t_multiplier: int = DEFAULT_T_MULTIPLIER) -> ProximityRecord:
    """Smoothed, date-matched PMI between two categories, in nats.

    pmi = ln( p(a,b|t) / (p(a|t) p(b|t)) ) with the joint count smoothed by
    ``smoothing``; marginals are unsmoothed. Computation is exactly
    symmetric in its arguments, including the seed derivation.
    """
    if a == b:
        raise ValueError("pmi of a category with itself is not defined here")
    if not index.category_volumes(a):
        raise ValueError(f"category {a} is empty in the corpus")
    if not index.category_volumes(b):
        raise ValueError(f"category {b} is empty in the corpus")
    t = draw_pmi_sample(index, a, b, seed, t_multiplier)
    size = len(t)
    count_a = count_b = joint = 0
    set_a = index.category_volumes(a)
    set_b = index.category_volumes(b)
    for vid in t:
        in_a = vid in set_a
        in_b = vid in set_b
        count_a += in_a
        count_b += in_b
        joint += in_a and in_b
    p_ab = (joint + smoothing) / size
    p_a = count_a / size
    p_b = count_b / size
    pmi = math.log(p_ab / (p_a * p_b))
    return ProximityRecord(a=a, b=b, pmi=pmi, joint_count=joint,
                           sample_size=size)


def compute_pairwise_pmi(index: CorpusIndex, categories: list[CategoryLabel],
                         seed: int, smoothing: float = DEFAULT_SMOOTHING,
                         t_multiplier: int = DEFAULT_T_MULTIPLIER,
                         threads: int = 1) -> list[ProximityRecord]:
    """PMI for every unordered category pair, in sorted pair order."""
    pairs = [(a, b) for i, a in enumerate(categories)
             for b in categories[i + 1:]]

    def work(pair):
        return compute_pmi(index, pair[0], pair[1], seed,
                           smoothing=smoothing, t_multiplier=t_multiplier)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(work, pairs))
    return [work(p) for p in pairs]


def apply_priors(records: list[ProximityRecord], priors: PriorTable
                 ) -> list[ProximityRecord]:
    """Blend prior proximity into matching records: (1-w) empirical + w prior."""
    out = []
    w = priors.blend_weight
    for rec in records:
        prior = priors.get(rec.a, rec.b)
        if prior is None:
            out.append(rec)
        else:
            out.append(replace(rec, pmi=(1.0 - w) * rec.pmi + w * prior,
                               prior_applied=True))
    return out


def default_prior_table(records: list[ProximityRecord],
                        blend_weight: float = 0.5,
                        percentile: float = 90.0) -> PriorTable:
    """Priors for same-name genre/subject pairs, anchored to the run's scale.

    The prior value is the given percentile of the empirical PMI values, so
    "Horror"/genre vs "Horror"/subject is pulled toward the top of whatever
    range this corpus actually produces.
    """
    value = float(np.percentile([r.pmi for r in records], percentile))
    pairs = {}
    for rec in records:
        if rec.a.name == rec.b.name and rec.a.kind != rec.b.kind:
            pairs[(str(rec.a), str(rec.b))] = value
    return PriorTable(pairs=pairs, blend_weight=blend_weight)


def social_distance_matrix(records: list[ProximityRecord],
                           categories: list[CategoryLabel]) -> DistanceMatrix:
    """Negated PMI as a distance: larger means socially farther apart."""
    pair_values = {(rec.a, rec.b): -rec.pmi for rec in records}
    return DistanceMatrix.from_pairs(categories, pair_values,
                                     method="social-pmi", missing="error")


def overlap_stats(index: CorpusIndex, records: list[ProximityRecord]) -> dict:
    """How sparse the co-assignment evidence is, corpus-wide and within t.

    (With t built as the full union plus a complement, the two joint counts
    coincide; both are reported so the construction can be audited.)
    """
    zero_in_t = sum(1 for r in records if r.joint_count == 0)
    zero_corpus = 0
    for rec in records:
        joint = index.category_volumes(rec.a) & index.category_volumes(rec.b)
        zero_corpus += not joint
    return {
        "n_pairs": len(records),
        "zero_overlap_within_t": zero_in_t,
        "zero_overlap_corpus": zero_corpus,
    }
