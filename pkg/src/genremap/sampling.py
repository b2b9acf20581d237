"""Sample construction: category samples, symmetric differences, date matching.

Three sample types feed the distance measures:

* fixed-size random samples of a category, with optional tag exclusions;
* symmetric-difference pairs ("A-not-B" / "B-not-A") so that comparisons
  between overlapping categories are not dominated by their shared volumes;
* contrast samples matched to a target's publication-year distribution, so
  that a model of a category is centered on books from the same era.

Year matching draws one pool volume per target volume from the same year;
if a year bucket is exhausted the search widens to +/-1 then +/-2 years.
All draws are without replacement and deterministic given the seed.
"""

from __future__ import annotations

import json
import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import CategoryLabel, CorpusIndex
from .errors import ShortfallError
from .seeding import derive_seed

logger = logging.getLogger(__name__)


@dataclass
class Sample:
    """A named, ordered draw of volume ids for one category."""

    label: str
    category: CategoryLabel | None
    volume_ids: list[str]
    seed: int
    exclusions: frozenset[CategoryLabel] = field(default_factory=frozenset)

    def __post_init__(self):
        if len(set(self.volume_ids)) != len(self.volume_ids):
            raise ValueError(f"sample {self.label!r} has duplicate volume ids")

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "category": str(self.category) if self.category else None,
            "volume_ids": list(self.volume_ids),
            "seed": self.seed,
            "exclusions": sorted(str(e) for e in self.exclusions),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Sample":
        return cls(
            label=obj["label"],
            category=CategoryLabel.parse(obj["category"]) if obj.get("category") else None,
            volume_ids=list(obj["volume_ids"]),
            seed=int(obj["seed"]),
            exclusions=frozenset(CategoryLabel.parse(e) for e in obj.get("exclusions", [])),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Sample":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class MatchedContrast:
    """A random draw matched to a target sample's year distribution."""

    target: Sample
    volume_ids: list[str]
    seed: int

    def to_json(self) -> dict:
        return {
            "target": self.target.to_json(),
            "volume_ids": list(self.volume_ids),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MatchedContrast":
        return cls(
            target=Sample.from_json(obj["target"]),
            volume_ids=list(obj["volume_ids"]),
            seed=int(obj["seed"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "MatchedContrast":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _eligible(index: CorpusIndex, category: CategoryLabel,
              exclusions: frozenset[CategoryLabel]) -> list[str]:
    pool = index.category_volumes(category)
    if exclusions:
        pool = {vid for vid in pool
                if not (index.volumes[vid].tags & exclusions)}
    return sorted(pool)


def draw_category_sample(index: CorpusIndex, category: CategoryLabel, n: int,
                         seed: int,
                         exclusions: frozenset[CategoryLabel] = frozenset(),
                         allow_short: bool = False,
                         label: str | None = None) -> Sample:
    """Uniform random n-subset of a category's volumes, without replacement.

    Raises ShortfallError naming the category and shortfall when fewer than
    n volumes are eligible, unless allow_short is set, in which case the
    maximum feasible sample is returned (and a warning logged).
    """
    exclusions = frozenset(exclusions)
    pool = _eligible(index, category, exclusions)
    if len(pool) < n:
        if not allow_short:
            raise ShortfallError(
                f"category {category} has {len(pool)} eligible volumes, "
                f"need {n} (short by {n - len(pool)})"
            )
        logger.warning("category %s: short sample %d < %d", category, len(pool), n)
        n = len(pool)
    rng = random.Random(seed)
    drawn = rng.sample(pool, n)
    return Sample(
        label=label or str(category),
        category=category,
        volume_ids=drawn,
        seed=seed,
        exclusions=exclusions,
    )


def _year_pools(index: CorpusIndex, candidate_ids, rng: random.Random
                ) -> dict[int, list[str]]:
    """Bucket candidates by year, each bucket pre-shuffled for popping."""
    buckets: dict[int, list[str]] = {}
    for vid in sorted(candidate_ids):
        buckets.setdefault(index.volumes[vid].year, []).append(vid)
    for year in sorted(buckets):
        rng.shuffle(buckets[year])
    return buckets


def _fill_year_buckets(demand: dict[int, int], pools: dict[int, list[str]],
                       rng: random.Random, widen: tuple[int, ...] = (1, 2),
                       ) -> tuple[list[str], dict[int, int]]:
    """Fill per-year demand from pools, widening to +/-w rings when short.

    Pools are consumed destructively (sampling without replacement across
    all buckets). Returns the drawn ids and any residual deficit per year.
    """
    chosen: list[str] = []
    deficits: dict[int, int] = {}
    for year in sorted(demand):
        need = demand[year]
        bucket = pools.get(year, [])
        while need > 0 and bucket:
            chosen.append(bucket.pop())
            need -= 1
        for w in widen:
            if need <= 0:
                break
            below = pools.get(year - w, [])
            above = pools.get(year + w, [])
            while need > 0 and (below or above):
                # pick a side proportional to remaining candidates
                if rng.randrange(len(below) + len(above)) < len(below):
                    chosen.append(below.pop())
                else:
                    chosen.append(above.pop())
                need -= 1
        if need > 0:
            deficits[year] = need
    return chosen, deficits


def draw_matched_contrast(index: CorpusIndex, target: Sample,
                          pool_exclusions: frozenset[CategoryLabel] = frozenset(),
                          seed: int = 0) -> MatchedContrast:
    """Draw a contrast set matching the target's year distribution.

    One pool volume per target volume, same year, widening to +/-1 then
    +/-2 years when a bucket runs out. The contrast never intersects the
    target. Raises ShortfallError listing deficient years if a bucket
    cannot be filled even after widening.
    """
    pool_exclusions = frozenset(pool_exclusions)
    target_ids = set(target.volume_ids)
    candidates = [
        vid for vid in index.volumes
        if vid not in target_ids
        and not (index.volumes[vid].tags & pool_exclusions)
    ]
    rng = random.Random(seed)
    pools = _year_pools(index, candidates, rng)
    demand = dict(Counter(index.volumes[vid].year for vid in target.volume_ids))
    chosen, deficits = _fill_year_buckets(demand, pools, rng)
    if deficits:
        detail = ", ".join(f"{y} (short {k})" for y, k in sorted(deficits.items()))
        raise ShortfallError(
            f"cannot match year distribution of {target.label!r} even with "
            f"+/-2 year widening; deficient years: {detail}"
        )
    return MatchedContrast(target=target, volume_ids=chosen, seed=seed)


def draw_matched_pool(index: CorpusIndex, target_ids: list[str], multiplier: int,
                      pool_exclusions: frozenset[CategoryLabel] = frozenset(),
                      exclude_ids: set[str] | None = None,
                      seed: int = 0) -> list[str]:
    """Best-effort date-matched draw of up to multiplier x len(target_ids).

    Like draw_matched_contrast but non-strict: buckets that stay short after
    widening are simply capped by the pool, so the result may be smaller
    than requested. Used to build normalization samples.
    """
    exclude = set(target_ids) | (exclude_ids or set())
    candidates = [
        vid for vid in index.volumes
        if vid not in exclude
        and not (index.volumes[vid].tags & frozenset(pool_exclusions))
    ]
    rng = random.Random(seed)
    pools = _year_pools(index, candidates, rng)
    base = Counter(index.volumes[vid].year for vid in target_ids)
    demand = {year: count * multiplier for year, count in base.items()}
    chosen, _deficits = _fill_year_buckets(demand, pools, rng)
    return chosen


def symmetric_difference_samples(index: CorpusIndex, a: CategoryLabel,
                                 b: CategoryLabel, n: int, seed: int
                                 ) -> tuple[Sample, Sample]:
    """Draw equal-size samples from a-not-b and b-not-a.

    If either pool is smaller than n, both samples shrink to the maximum
    feasible equal size (callers should compare lengths against n and
    record the shortfall). An empty pool makes the pair incomparable by
    this method and raises ShortfallError.
    """
    if a == b:
        raise ValueError("symmetric difference of a category with itself")
    pool_a = _eligible(index, a, frozenset({b}))
    pool_b = _eligible(index, b, frozenset({a}))
    if not pool_a or not pool_b:
        empty = a if not pool_a else b
        other = b if not pool_a else a
        raise ShortfallError(
            f"symmetric difference pool for {empty} without {other} is empty; "
            f"pair ({a}, {b}) is incomparable by this method"
        )
    size = min(n, len(pool_a), len(pool_b))
    if size < n:
        logger.warning("symmetric difference (%s, %s): size reduced to %d < %d",
                       a, b, size, n)
    sample_a = draw_category_sample(
        index, a, size, derive_seed(seed, "symdiff", str(a), str(b)),
        exclusions=frozenset({b}), label=f"{a.name}-Not-{b.name}")
    sample_b = draw_category_sample(
        index, b, size, derive_seed(seed, "symdiff", str(b), str(a)),
        exclusions=frozenset({a}), label=f"{b.name}-Not-{a.name}")
    return sample_a, sample_b
