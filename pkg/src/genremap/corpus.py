"""Volume ingest: metadata parsing, token counts, page trimming, consolidation.

Metadata arrives as JSON lines (one object per volume: volume_id, title_key,
year, tags, feature_file). Token counts arrive as one TSV per volume, either
flat (``token<TAB>count``) or page-level (``page<TAB>token<TAB>count``).
Page-level files are trimmed before merging: a fixed fraction of leading and
trailing pages is dropped, because front and back matter are usually not part
of the text being measured.

Rare token classes are consolidated into collective features so that
individually sparse tokens still carry signal: any token whose first
character is a digit becomes ``#arabicnumber``, and tokens that are pure
punctuation become ``#punctuation``. Consolidation preserves total token
mass. Tokens are lowercased and stripped of leading/trailing punctuation,
keeping internal apostrophes ("don't" stays one token).
"""

from __future__ import annotations

import json
import math
import pickle
import string
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DegenerateVolumeError, MetadataError

VALID_KINDS = ("genre", "subject", "audience", "form")
NUMBER_TOKEN = "#arabicnumber"
PUNCT_TOKEN = "#punctuation"

# string.punctuation plus typographic marks common in OCR output
_STRIP_CHARS = string.punctuation + "‘’“”–—…«»"


@dataclass(frozen=True, order=True)
class CategoryLabel:
    """A (name, kind) category; "Humor"/genre and "Humor"/subject are distinct."""

    name: str
    kind: str = "genre"

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise ValueError(
                f"unknown category kind {self.kind!r}; expected one of {VALID_KINDS}"
            )

    def __str__(self) -> str:
        return f"{self.name}:{self.kind}"

    @classmethod
    def parse(cls, text: str) -> "CategoryLabel":
        """Parse the "Name:kind" syntax used in CLI arguments and files."""
        name, sep, kind = text.rpartition(":")
        if not sep or not name:
            raise ValueError(
                f"category {text!r} is not in 'Name:kind' form "
                f"(kinds: {', '.join(VALID_KINDS)})"
            )
        return cls(name=name, kind=kind.strip().lower())


@dataclass(frozen=True)
class VolumeRecord:
    """One document: identity, publication year, category tags, token counts."""

    volume_id: str
    title_key: str
    year: int
    tags: frozenset[CategoryLabel]
    tokens: dict[str, int]

    def total_tokens(self) -> int:
        return sum(self.tokens.values())


@dataclass
class ConsolidationRules:
    lowercase: bool = True
    strip_punctuation: bool = True
    number_token: str = NUMBER_TOKEN
    punctuation_token: str = PUNCT_TOKEN


@dataclass
class IngestConfig:
    head_trim: float = 0.10
    tail_trim: float = 0.05
    year_min: int = 1700
    year_max: int = 2020
    rules: ConsolidationRules = field(default_factory=ConsolidationRules)


def _normalize_token(token: str, rules: ConsolidationRules) -> str:
    if token.startswith("#"):
        # already a collective feature; leave untouched
        return token
    t = token
    if rules.strip_punctuation:
        t = t.strip(_STRIP_CHARS)
        if not t:
            return rules.punctuation_token
    if rules.lowercase:
        t = t.lower()
    if t[0].isdigit():
        return rules.number_token
    return t


def consolidate_tokens(raw: dict[str, int], rules: ConsolidationRules | None = None
                       ) -> dict[str, int]:
    """Apply lowercasing, punctuation stripping and collective features.

    Total token mass is preserved: every input count lands on exactly one
    output token. Zero counts are dropped.
    """
    rules = rules or ConsolidationRules()
    out: Counter[str] = Counter()
    for token, count in raw.items():
        if count < 0:
            raise ValueError(f"negative count for token {token!r}")
        if count == 0:
            continue
        out[_normalize_token(token, rules)] += count
    return dict(out)


def trim_pages(pages: list[dict[str, int]], head_frac: float = 0.10,
               tail_frac: float = 0.05) -> dict[str, int]:
    """Drop leading/trailing pages by fraction and merge the rest.

    floor() on the page count decides how many pages go; head trimming is
    applied before tail trimming. A small epsilon guards float noise so a
    fraction like 0.15 of 20 pages floors to 3, not 2.
    """
    if not pages:
        raise DegenerateVolumeError("volume has no pages")
    if head_frac < 0 or tail_frac < 0 or head_frac + tail_frac >= 1:
        raise ValueError("require 0 <= head_frac + tail_frac < 1")
    n = len(pages)
    drop_head = int(math.floor(head_frac * n + 1e-9))
    drop_tail = int(math.floor(tail_frac * n + 1e-9))
    kept = pages[drop_head:n - drop_tail]
    if not kept:
        raise DegenerateVolumeError("all pages trimmed away")
    merged: Counter[str] = Counter()
    for page in kept:
        merged.update(page)
    merged = +merged  # drop zero and negative artifacts
    if not merged:
        raise DegenerateVolumeError("no tokens left after trimming")
    return dict(merged)


@dataclass
class CorpusIndex:
    """Immutable index over ingested volumes; safe for concurrent reads.

    by_category and by_year are exact inverses of the per-volume fields;
    document_frequency counts volumes containing each token.
    """

    volumes: dict[str, VolumeRecord]
    by_category: dict[CategoryLabel, frozenset[str]]
    by_year: dict[int, frozenset[str]]
    document_frequency: dict[str, int]
    warnings: list[str] = field(default_factory=list)

    @classmethod
    def build(cls, records: list[VolumeRecord], warnings: list[str] | None = None
              ) -> "CorpusIndex":
        volumes: dict[str, VolumeRecord] = {}
        for rec in sorted(records, key=lambda r: r.volume_id):
            if rec.volume_id in volumes:
                raise ValueError(f"duplicate volume_id {rec.volume_id!r}")
            volumes[rec.volume_id] = rec
        by_category: dict[CategoryLabel, set[str]] = {}
        by_year: dict[int, set[str]] = {}
        df: Counter[str] = Counter()
        for vid, rec in volumes.items():
            for tag in rec.tags:
                by_category.setdefault(tag, set()).add(vid)
            by_year.setdefault(rec.year, set()).add(vid)
            df.update(rec.tokens.keys())
        return cls(
            volumes=volumes,
            by_category={c: frozenset(v) for c, v in sorted(by_category.items())},
            by_year={y: frozenset(v) for y, v in sorted(by_year.items())},
            document_frequency=dict(sorted(df.items())),
            warnings=list(warnings or []),
        )

    @property
    def n_volumes(self) -> int:
        return len(self.volumes)

    def categories(self) -> list[CategoryLabel]:
        return sorted(self.by_category)

    def category_volumes(self, label: CategoryLabel) -> frozenset[str]:
        return self.by_category.get(label, frozenset())

    def save(self, path: str | Path) -> None:
        """Serialize to a canonical byte-identical form.

        Sets are written as sorted tuples so the output does not depend on
        hash randomization; the same inputs always produce the same bytes.
        """
        payload = {
            "format": 1,
            "volumes": [
                (
                    rec.volume_id,
                    rec.title_key,
                    rec.year,
                    tuple(sorted((t.name, t.kind) for t in rec.tags)),
                    tuple(sorted(rec.tokens.items())),
                )
                for rec in (self.volumes[k] for k in sorted(self.volumes))
            ],
            "warnings": list(self.warnings),
        }
        with open(path, "wb") as fh:
            pickle.dump(payload, fh, protocol=4)

    @classmethod
    def load(cls, path: str | Path) -> "CorpusIndex":
        with open(path, "rb") as fh:
            payload = pickle.load(fh)
        if payload.get("format") != 1:
            raise ValueError(f"unsupported index format in {path}")
        records = [
            VolumeRecord(
                volume_id=vid,
                title_key=title,
                year=year,
                tags=frozenset(CategoryLabel(n, k) for n, k in tags),
                tokens=dict(tokens),
            )
            for vid, title, year, tags, tokens in payload["volumes"]
        ]
        return cls.build(records, warnings=payload.get("warnings", []))


def _read_feature_file(path: Path) -> list[dict[str, int]] | dict[str, int]:
    """Read a TSV count file; returns page maps if page-level, else one map."""
    pages: dict[int, Counter[str]] = {}
    flat: Counter[str] = Counter()
    paged = None
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if paged is None:
                paged = len(cols) == 3
            if paged:
                if len(cols) != 3:
                    raise ValueError(f"{path}: mixed column counts")
                page, token, count = int(cols[0]), cols[1], int(cols[2])
                pages.setdefault(page, Counter())[token] += count
            else:
                if len(cols) != 2:
                    raise ValueError(f"{path}: expected 'token<TAB>count' lines")
                flat[cols[0]] += int(cols[1])
    if paged:
        return [dict(pages[p]) for p in sorted(pages)]
    return dict(flat)


def _load_volume(row: dict, features_dir: Path, config: IngestConfig
                 ) -> tuple[VolumeRecord | None, str | None]:
    """Load one volume's counts. Returns (record, warning); record None on skip."""
    vid = row["volume_id"]
    year = row.get("year")
    if year is None:
        return None, f"volume {vid!r}: no publication year, skipped"
    if not (config.year_min <= year <= config.year_max):
        return None, (f"volume {vid!r}: year {year} outside corpus range "
                      f"{config.year_min}-{config.year_max}, skipped")
    feature_path = Path(row["feature_file"])
    if not feature_path.is_absolute():
        feature_path = features_dir / feature_path
    if not feature_path.is_file():
        return None, f"volume {vid!r}: feature file not found: {feature_path}"
    try:
        counts = _read_feature_file(feature_path)
        if isinstance(counts, list):
            counts = trim_pages(counts, config.head_trim, config.tail_trim)
        tokens = consolidate_tokens(counts, config.rules)
    except (ValueError, DegenerateVolumeError) as exc:
        return None, f"volume {vid!r}: {exc}"
    if not tokens:
        return None, f"volume {vid!r}: no tokens, skipped"
    tags = frozenset(
        CategoryLabel(t["name"], t.get("kind", "genre")) for t in row.get("tags", [])
    )
    record = VolumeRecord(
        volume_id=vid,
        title_key=row.get("title_key", vid),
        year=int(year),
        tags=tags,
        tokens=dict(sorted(tokens.items())),
    )
    return record, None


def _parse_metadata_row(line: str, line_no: int) -> dict:
    try:
        row = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MetadataError(line_no, f"invalid JSON ({exc.msg})") from exc
    if not isinstance(row, dict):
        raise MetadataError(line_no, "expected a JSON object")
    for key in ("volume_id", "feature_file"):
        if key not in row:
            raise MetadataError(line_no, f"missing required field {key!r}")
    year = row.get("year")
    if year is not None and not isinstance(year, int):
        raise MetadataError(line_no, f"year must be an integer, got {year!r}")
    tags = row.get("tags", [])
    if not isinstance(tags, list):
        raise MetadataError(line_no, "tags must be an array of {name, kind}")
    for tag in tags:
        if not isinstance(tag, dict) or "name" not in tag:
            raise MetadataError(line_no, f"malformed tag entry {tag!r}")
        kind = tag.get("kind", "genre")
        if kind not in VALID_KINDS:
            raise MetadataError(line_no, f"unknown tag kind {kind!r}")
    return row


def ingest_corpus(metadata_path: str | Path, features_dir: str | Path,
                  config: IngestConfig | None = None, threads: int = 1
                  ) -> CorpusIndex:
    """Ingest volume metadata and counts into a CorpusIndex.

    Unparseable metadata rows are fatal (MetadataError with the line number).
    Record-level problems (missing feature file, out-of-range or missing
    year, empty volume) skip the volume and are collected on the returned
    index's ``warnings`` list in input order.
    """
    config = config or IngestConfig()
    metadata_path = Path(metadata_path)
    features_dir = Path(features_dir)
    rows: list[tuple[dict, int]] = []
    with open(metadata_path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rows.append((_parse_metadata_row(line, line_no), line_no))

    seen: set[str] = set()
    for row, line_no in rows:
        if row["volume_id"] in seen:
            raise MetadataError(line_no, f"duplicate volume_id {row['volume_id']!r}")
        seen.add(row["volume_id"])

    def work(item):
        row, _line_no = item
        return _load_volume(row, features_dir, config)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, rows))
    else:
        results = [work(item) for item in rows]

    records = [rec for rec, _ in results if rec is not None]
    warnings = [warn for _, warn in results if warn is not None]
    return CorpusIndex.build(records, warnings=warnings)
