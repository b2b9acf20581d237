"""Symmetric distance matrices over category labels, with CSV round-trip.

The CSV layout is a full symmetric matrix with a header row and column of
labels; the top-left cell carries the method tag. Missing pairs are written
as ``nan``. Values may be negative (some methods are statistical distances,
not metrics).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import CategoryLabel


@dataclass
class DistanceMatrix:
    labels: list[CategoryLabel]
    values: np.ndarray
    method: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        n = len(self.labels)
        if self.values.shape != (n, n):
            raise ValueError(
                f"matrix shape {self.values.shape} does not match {n} labels"
            )
        if len(set(self.labels)) != n:
            raise ValueError("duplicate labels")
        if not np.allclose(np.nan_to_num(np.diag(self.values)), 0.0, atol=1e-12):
            raise ValueError("diagonal must be zero")
        a, b = self.values, self.values.T
        mask = ~(np.isnan(a) & np.isnan(b))
        if not np.allclose(a[mask], b[mask], atol=1e-9, equal_nan=True):
            raise ValueError("matrix must be symmetric")
        self._pos = {label: i for i, label in enumerate(self.labels)}

    def index_of(self, label: CategoryLabel) -> int:
        return self._pos[label]

    def value(self, a: CategoryLabel, b: CategoryLabel) -> float:
        return float(self.values[self._pos[a], self._pos[b]])

    def pairs(self):
        """Yield (a, b, value) over the upper triangle, row-major order."""
        n = len(self.labels)
        for i in range(n):
            for j in range(i + 1, n):
                yield self.labels[i], self.labels[j], float(self.values[i, j])

    def missing_pairs(self) -> list[tuple[CategoryLabel, CategoryLabel]]:
        return [(a, b) for a, b, v in self.pairs() if np.isnan(v)]

    @classmethod
    def from_pairs(cls, labels: list[CategoryLabel],
                   pair_values: dict[tuple[CategoryLabel, CategoryLabel], float],
                   method: str = "", missing: str = "error") -> "DistanceMatrix":
        """Assemble a matrix from unordered-pair values.

        missing="error" raises listing absent pairs; missing="nan" marks them.
        """
        n = len(labels)
        values = np.zeros((n, n))
        absent = []
        for i in range(n):
            for j in range(i + 1, n):
                a, b = labels[i], labels[j]
                if (a, b) in pair_values:
                    v = pair_values[(a, b)]
                elif (b, a) in pair_values:
                    v = pair_values[(b, a)]
                else:
                    absent.append((a, b))
                    v = np.nan
                values[i, j] = values[j, i] = v
        if absent and missing == "error":
            listed = ", ".join(f"({a}, {b})" for a, b in absent)
            raise ValueError(f"missing pairs: {listed}")
        return cls(labels=labels, values=values, method=method)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([self.method] + [str(label) for label in self.labels])
            for i, label in enumerate(self.labels):
                writer.writerow(
                    [str(label)] + [repr(float(v)) for v in self.values[i]]
                )

    @classmethod
    def from_csv(cls, path: str | Path) -> "DistanceMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError(f"{path}: empty file")
        method = rows[0][0]
        labels = [CategoryLabel.parse(cell) for cell in rows[0][1:]]
        values = np.full((len(labels), len(labels)), np.nan)
        for i, row in enumerate(rows[1:]):
            if CategoryLabel.parse(row[0]) != labels[i]:
                raise ValueError(f"{path}: row label {row[0]!r} out of order")
            for j, cell in enumerate(row[1:]):
                values[i, j] = float(cell) if cell not in ("", "nan") else np.nan
        return cls(labels=labels, values=values, method=method)

    def reordered(self, labels: list[CategoryLabel]) -> "DistanceMatrix":
        """Return the same matrix with rows/columns in the given label order."""
        if set(labels) != set(self.labels):
            raise ValueError("label sets differ")
        idx = [self._pos[label] for label in labels]
        return DistanceMatrix(
            labels=list(labels),
            values=self.values[np.ix_(idx, idx)],
            method=self.method,
        )
