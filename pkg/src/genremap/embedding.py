"""Classical (Torgerson) multidimensional scaling of a distance matrix.

Double-center the squared distances, take the top eigenpairs, and scale
eigenvectors by the square roots of their eigenvalues. Methods whose
distances can be negative are first shifted: the smallest constant making
all off-diagonal entries nonnegative is added and recorded. A fixed sign
convention (first nonzero coordinate of each axis positive) makes the
output deterministic.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import CategoryLabel, CorpusIndex
from .matrix import DistanceMatrix
from .sampling import Sample

logger = logging.getLogger(__name__)


@dataclass
class EmbeddingResult:
    labels: list[CategoryLabel]
    coords: np.ndarray
    eigenvalues: list[float]
    shift_applied: float
    mean_dates: dict[CategoryLabel, float] | None = None
    warnings: list[str] = field(default_factory=list)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["label", "x", "y", "mean_date"])
            for i, label in enumerate(self.labels):
                date = ""
                if self.mean_dates and label in self.mean_dates:
                    date = repr(float(self.mean_dates[label]))
                writer.writerow([str(label), repr(float(self.coords[i, 0])),
                                 repr(float(self.coords[i, 1])), date])


def mds_embed(distances: DistanceMatrix, dims: int = 2,
              mean_dates: dict[CategoryLabel, float] | None = None
              ) -> EmbeddingResult:
    """Project a distance matrix to ``dims`` coordinates.

    If fewer than ``dims`` eigenvalues are positive, the missing axes are
    zero-filled and a warning is recorded.
    """
    if np.isnan(distances.values).any():
        raise ValueError("distance matrix has missing pairs; cannot embed")
    n = len(distances.labels)
    if n < 2:
        raise ValueError("need at least 2 labels to embed")
    values = distances.values.copy()
    off_diag = ~np.eye(n, dtype=bool)
    minimum = float(values[off_diag].min()) if n > 1 else 0.0
    shift = -minimum if minimum < 0 else 0.0
    if shift > 0:
        values[off_diag] += shift

    centering = np.eye(n) - np.ones((n, n)) / n
    b = -0.5 * centering @ (values ** 2) @ centering
    eigenvalues, eigenvectors = np.linalg.eigh(b)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]

    warnings = []
    coords = np.zeros((n, dims))
    available = int(np.sum(eigenvalues[:dims] > 0))
    if available < dims:
        warnings.append(
            f"only {available} positive eigenvalues; remaining of {dims} "
            f"requested dimensions are zero-filled")
        logger.warning(warnings[-1])
    for k in range(available):
        axis = eigenvectors[:, k] * np.sqrt(eigenvalues[k])
        nonzero = np.nonzero(np.abs(axis) > 1e-12)[0]
        if nonzero.size and axis[nonzero[0]] < 0:
            axis = -axis
        coords[:, k] = axis

    return EmbeddingResult(
        labels=list(distances.labels),
        coords=coords,
        eigenvalues=[float(v) for v in eigenvalues],
        shift_applied=shift,
        mean_dates=mean_dates,
        warnings=warnings,
    )


def mean_publication_dates(index: CorpusIndex, samples: dict[CategoryLabel, Sample]
                           ) -> dict[CategoryLabel, float]:
    """Mean publication year of each category's primary sample."""
    return {
        label: float(np.mean([index.volumes[vid].year
                              for vid in sample.volume_ids]))
        for label, sample in samples.items()
    }
