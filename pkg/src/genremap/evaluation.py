"""Agreement between textual distance matrices and the social benchmark.

Each textual method's upper-triangle distances are correlated (Pearson)
with the social distances over the same category pairs, with a Fisher-z
confidence interval. Pairs missing from either matrix are excluded and
listed. Methods are then ranked, flagging pairs of methods whose
confidence intervals overlap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .matrix import DistanceMatrix

OVERLAP_CAVEAT = (
    "Overlapping confidence intervals do not establish that two methods are "
    "equivalent: when several matrices share the same confound, the real "
    "separation between methods can be larger than the intervals suggest."
)


@dataclass
class EvalReport:
    method: str
    r: float
    ci_low: float
    ci_high: float
    n_pairs: int
    excluded_pairs: list[tuple[str, str]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "r": self.r,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n_pairs": self.n_pairs,
            "excluded_pairs": [list(p) for p in self.excluded_pairs],
        }


def pearson_ci(r: float, n: int, level: float = 0.95) -> tuple[float, float]:
    """Fisher-z confidence interval: tanh(arctanh(r) +/- z / sqrt(n-3))."""
    if n < 4:
        raise ValueError("need at least 4 observations for an interval")
    if abs(r) >= 1.0:
        return (r, r)
    z = norm.ppf(0.5 + level / 2.0)
    half = z / math.sqrt(n - 3)
    center = math.atanh(r)
    return (math.tanh(center - half), math.tanh(center + half))


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt(float(np.sum(dx * dx))) * math.sqrt(float(np.sum(dy * dy)))
    if denom == 0.0:
        raise ValueError("correlation of a constant vector is undefined")
    return float(np.sum(dx * dy)) / denom


def correlate(textual: DistanceMatrix, social: DistanceMatrix,
              level: float = 0.95) -> EvalReport:
    """Pearson r between the two matrices' upper triangles.

    Requires identical label sets; pairs that are missing (NaN) in either
    matrix are excluded from the correlation and listed on the report.
    """
    if set(textual.labels) != set(social.labels):
        only_t = {str(l) for l in textual.labels} - {str(l) for l in social.labels}
        only_s = {str(l) for l in social.labels} - {str(l) for l in textual.labels}
        raise ValueError(f"label sets differ (textual only: {sorted(only_t)}, "
                         f"social only: {sorted(only_s)})")
    social = social.reordered(textual.labels)
    xs, ys, excluded = [], [], []
    for (a, b, tv), (_, _, sv) in zip(textual.pairs(), social.pairs()):
        if np.isnan(tv) or np.isnan(sv):
            excluded.append((str(a), str(b)))
        else:
            xs.append(tv)
            ys.append(sv)
    if len(xs) < 3:
        raise ValueError(f"only {len(xs)} comparable pairs; need at least 3")
    r = _pearson(np.array(xs), np.array(ys))
    ci_low, ci_high = pearson_ci(r, len(xs), level)
    return EvalReport(method=textual.method, r=r, ci_low=ci_low,
                      ci_high=ci_high, n_pairs=len(xs),
                      excluded_pairs=excluded)


@dataclass
class MethodComparison:
    ranking: list[EvalReport]
    overlaps: list[tuple[str, str]]
    caveat: str = OVERLAP_CAVEAT

    def to_json(self) -> dict:
        return {
            "ranking": [rep.to_json() for rep in self.ranking],
            "ci_overlaps": [list(p) for p in self.overlaps],
            "caveat": self.caveat,
        }


def compare_methods(reports: list[EvalReport]) -> MethodComparison:
    """Rank methods by r and flag pairs whose confidence intervals overlap."""
    if len(reports) < 2:
        raise ValueError("need at least 2 reports to compare")
    ranking = sorted(reports, key=lambda rep: -rep.r)
    overlaps = []
    for i, first in enumerate(ranking):
        for second in ranking[i + 1:]:
            if first.ci_low <= second.ci_high and second.ci_low <= first.ci_high:
                overlaps.append((first.method, second.method))
    return MethodComparison(ranking=ranking, overlaps=overlaps)


def harmonize_exclusions(matrices: list[DistanceMatrix]) -> list[DistanceMatrix]:
    """Mark any pair missing in one matrix as missing in all of them.

    Keeps the per-method correlations comparable: every method is scored
    over exactly the same category pairs.
    """
    if not matrices:
        return []
    labels = matrices[0].labels
    aligned = [m.reordered(labels) for m in matrices]
    missing = np.zeros_like(aligned[0].values, dtype=bool)
    for m in aligned:
        missing |= np.isnan(m.values)
    np.fill_diagonal(missing, False)
    out = []
    for m in aligned:
        values = m.values.copy()
        values[missing] = np.nan
        out.append(DistanceMatrix(labels=labels, values=values, method=m.method))
    return out


def write_report(path: str | Path, comparison: MethodComparison,
                 extra: dict | None = None) -> None:
    payload = comparison.to_json()
    payload["ci_method"] = "fisher-z"
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
