"""genremap: social and textual distance measures between document categories.

A library and CLI for measuring how far apart labeled categories of
documents (genres, subjects) sit in a historical corpus: one social
proximity measure based on smoothed, date-matched PMI over co-assigned
labels, and four textual measures (aggregate tf-idf cosine, three
topic-vector strategies, and a supervised cross-model distance), plus the
machinery to evaluate their agreement and draw category maps.
"""

__version__ = "0.1.0"

from .corpus import CategoryLabel, CorpusIndex, IngestConfig, VolumeRecord, \
    consolidate_tokens, ingest_corpus, trim_pages
from .matrix import DistanceMatrix
from .sampling import MatchedContrast, Sample, draw_category_sample, \
    draw_matched_contrast, symmetric_difference_samples

__all__ = [
    "CategoryLabel",
    "CorpusIndex",
    "DistanceMatrix",
    "IngestConfig",
    "MatchedContrast",
    "Sample",
    "VolumeRecord",
    "consolidate_tokens",
    "draw_category_sample",
    "draw_matched_contrast",
    "ingest_corpus",
    "symmetric_difference_samples",
    "trim_pages",
    "__version__",
]
