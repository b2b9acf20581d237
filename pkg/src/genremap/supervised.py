"""Supervised cross-model distance between categories.

Each category gets its own regularized logistic classifier, trained to
separate the category's sample from a random contrast set matched to the
same publication-year distribution (so the model learns the category, not
its era). Feature count and regularization strength are tuned by grid
search with cross-validated AUC.

The distance between two categories applies each model to the volumes the
other was trained on and compares how the two models rank those books. The
two Spearman correlations are Fisher z-transformed (arctanh) before
averaging, which also gives the distance an unbounded scale:

    d(a, b) = -1/2 (arctanh(rho_a) + arctanh(rho_b))

Strong agreement makes d very negative; unrelated rankings give d near 0.
Because ranks are all that matter, d is invariant under any strictly
monotone transform of either model's scores.
"""

from __future__ import annotations

import logging
import math
import pickle
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .corpus import CategoryLabel, CorpusIndex, VolumeRecord
from .errors import ConvergenceError
from .lexical import Vocabulary, build_vocabulary
from .matrix import DistanceMatrix
from .sampling import MatchedContrast, Sample
from .seeding import derive_seed

logger = logging.getLogger(__name__)

RHO_CLAMP = 1.0 - 1e-6
MAX_ABS_DISTANCE = math.atanh(RHO_CLAMP)  # ~7.254
PROB_EPS = 1e-15
GRAD_TOL = 1e-6


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------

@dataclass
class FeatureScaling:
    """Per-feature standardization parameters fit on training data."""

    mean: np.ndarray
    sd: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "FeatureScaling":
        return cls(mean=X.mean(axis=0), sd=X.std(axis=0))

    def apply(self, X: np.ndarray) -> np.ndarray:
        out = X - self.mean
        nonzero = self.sd > 0
        out[..., nonzero] /= self.sd[nonzero]
        out[..., ~nonzero] = 0.0  # constant features carry no information
        return out


def _raw_counts(volume: VolumeRecord, positions: dict[str, int], size: int
                ) -> np.ndarray:
    row = np.zeros(size)
    for token, count in volume.tokens.items():
        pos = positions.get(token)
        if pos is not None:
            row[pos] = count
    return row


def featurize(volume: VolumeRecord, vocab: Vocabulary,
              scaling: FeatureScaling | None = None) -> np.ndarray:
    """Relative frequencies over the vocabulary, optionally standardized."""
    row = _raw_counts(volume, vocab.position_map(), vocab.size)
    total = row.sum()
    if total == 0:
        raise ValueError(f"volume {volume.volume_id!r} has no in-vocabulary tokens")
    row /= total
    if scaling is not None:
        row = scaling.apply(row)
    return row


def _count_matrix(index: CorpusIndex, volume_ids: list[str], vocab: Vocabulary
                  ) -> np.ndarray:
    positions = vocab.position_map()
    return np.stack([
        _raw_counts(index.volumes[vid], positions, vocab.size)
        for vid in volume_ids
    ])


def _frequency_matrix(counts: np.ndarray, n_features: int,
                      volume_ids: list[str]) -> np.ndarray:
    sub = counts[:, :n_features]
    totals = sub.sum(axis=1)
    if np.any(totals == 0):
        bad = [volume_ids[i] for i in np.nonzero(totals == 0)[0]]
        raise ValueError(f"volumes with no in-vocabulary tokens: {bad}")
    return sub / totals[:, None]


# ---------------------------------------------------------------------------
# L2-regularized logistic regression
# ---------------------------------------------------------------------------

def logistic_objective(params: np.ndarray, X: np.ndarray, y: np.ndarray,
                       C: float) -> tuple[float, np.ndarray]:
    """Loss and gradient; params = [weights..., bias], bias unregularized.

    J = sum_i softplus(z_i) - y_i z_i + ||w||^2 / (2C), with z = Xw + b.
    Smaller C means stronger regularization.
    """
    w, b = params[:-1], params[-1]
    z = X @ w + b
    loss = float(np.sum(np.logaddexp(0.0, z) - y * z)) + w @ w / (2.0 * C)
    sigma = 1.0 / (1.0 + np.exp(-z))
    residual = sigma - y
    grad = np.empty_like(params)
    grad[:-1] = X.T @ residual + w / C
    grad[-1] = residual.sum()
    return loss, grad


def _logistic_hessp(params: np.ndarray, vec: np.ndarray, X: np.ndarray,
                    y: np.ndarray, C: float) -> np.ndarray:
    """Hessian-vector product for the objective above."""
    w, b = params[:-1], params[-1]
    z = X @ w + b
    sigma = 1.0 / (1.0 + np.exp(-z))
    weight = sigma * (1.0 - sigma)
    inner = weight * (X @ vec[:-1] + vec[-1])
    out = np.empty_like(params)
    out[:-1] = X.T @ inner + vec[:-1] / C
    out[-1] = inner.sum()
    return out


def train_logistic(X: np.ndarray, y: np.ndarray, C: float,
                   grad_tol: float = GRAD_TOL, max_iter: int = 5000
                   ) -> tuple[np.ndarray, float, list[float]]:
    """Minimize the regularized logistic loss until the gradient is tiny.

    Quasi-Newton first; if that stalls on tiny objective changes before the
    gradient contract is met, a Newton-CG polish finishes the job. Returns
    (weights, bias, per-iteration objective values). Raises ConvergenceError
    with diagnostics if the gradient norm stays above grad_tol.
    """
    params0 = np.zeros(X.shape[1] + 1)
    history: list[float] = []

    def track(xk):
        history.append(logistic_objective(xk, X, y, C)[0])

    result = minimize(
        logistic_objective, params0, args=(X, y, C), jac=True,
        method="L-BFGS-B", callback=track,
        options={"maxiter": max_iter, "ftol": 1e-18, "gtol": 1e-9,
                 "maxfun": 10 * max_iter},
    )
    params = result.x
    iterations = int(result.nit)
    _, grad = logistic_objective(params, X, y, C)
    grad_norm = float(np.linalg.norm(grad))
    if grad_norm > grad_tol:
        polish = minimize(
            logistic_objective, params, args=(X, y, C), jac=True,
            hessp=_logistic_hessp, method="Newton-CG", callback=track,
            options={"maxiter": 100, "xtol": 1e-14},
        )
        params = polish.x
        iterations += int(polish.nit)
        _, grad = logistic_objective(params, X, y, C)
        grad_norm = float(np.linalg.norm(grad))
    if grad_norm > grad_tol:
        raise ConvergenceError(
            f"logistic fit stopped at gradient norm {grad_norm:.3e} "
            f"(> {grad_tol}) after {iterations} iterations",
            grad_norm=grad_norm, iterations=iterations,
        )
    return params[:-1], float(params[-1]), history


def _sigmoid_scores(X: np.ndarray, weights: np.ndarray, bias: float) -> np.ndarray:
    z = X @ weights + bias
    probs = 1.0 / (1.0 + np.exp(-z))
    return np.clip(probs, PROB_EPS, 1.0 - PROB_EPS)


def auc_score(y: np.ndarray, scores: np.ndarray) -> float:
    """Rank-based AUC with average ranks for ties."""
    y = np.asarray(y)
    ranks = average_ranks(np.asarray(scores, dtype=np.float64))
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    pos_rank_sum = float(ranks[y == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


# ---------------------------------------------------------------------------
# Grid-searched per-category model
# ---------------------------------------------------------------------------

@dataclass
class GridSpec:
    feature_counts: list[int] = field(
        default_factory=lambda: [500, 1000, 2000, 4000, 8000])
    regularization: list[float] = field(
        default_factory=lambda: [0.001, 0.01, 0.1, 1.0, 10.0])

    def __post_init__(self):
        if not self.feature_counts or not self.regularization:
            raise ValueError("grid must be non-empty")


@dataclass
class TrainedClassifier:
    category: CategoryLabel
    vocabulary: Vocabulary
    weights: np.ndarray
    bias: float
    regularization: float
    feature_scaling: FeatureScaling
    train_sample: Sample
    contrast: MatchedContrast
    cv_score: float
    seed: int

    def save(self, path: str | Path) -> None:
        payload = {
            "format": 1,
            "category": (self.category.name, self.category.kind),
            "vocabulary": list(self.vocabulary.tokens),
            "weights": self.weights,
            "bias": self.bias,
            "regularization": self.regularization,
            "scaling_mean": self.feature_scaling.mean,
            "scaling_sd": self.feature_scaling.sd,
            "train_sample": self.train_sample.to_json(),
            "contrast": self.contrast.to_json(),
            "cv_score": self.cv_score,
            "seed": self.seed,
        }
        with open(path, "wb") as fh:
            pickle.dump(payload, fh, protocol=4)

    @classmethod
    def load(cls, path: str | Path) -> "TrainedClassifier":
        with open(path, "rb") as fh:
            payload = pickle.load(fh)
        if payload.get("format") != 1:
            raise ValueError(f"unsupported classifier format in {path}")
        return cls(
            category=CategoryLabel(*payload["category"]),
            vocabulary=Vocabulary(tokens=tuple(payload["vocabulary"])),
            weights=payload["weights"],
            bias=payload["bias"],
            regularization=payload["regularization"],
            feature_scaling=FeatureScaling(mean=payload["scaling_mean"],
                                           sd=payload["scaling_sd"]),
            train_sample=Sample.from_json(payload["train_sample"]),
            contrast=MatchedContrast.from_json(payload["contrast"]),
            cv_score=payload["cv_score"],
            seed=payload["seed"],
        )


def _fold_assignment(y: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Stratified fold labels, deterministic given the seed."""
    rng = np.random.default_rng(seed)
    assignment = np.empty(y.size, dtype=np.int64)
    for cls in (0, 1):
        idx = np.nonzero(y == cls)[0]
        rng.shuffle(idx)
        for i, sample_idx in enumerate(idx):
            assignment[sample_idx] = i % folds
    return assignment


def train_genre_model(index: CorpusIndex, sample: Sample,
                      contrast: MatchedContrast, grid: GridSpec | None = None,
                      folds: int = 5, seed: int = 0) -> TrainedClassifier:
    """Grid-search a logistic model separating the sample from its contrast.

    Every (feature count, C) cell is scored by k-fold cross-validated AUC;
    ties prefer fewer features, then stronger regularization (smaller C).
    The winning cell is refit on all the data.
    """
    if len(sample.volume_ids) != len(contrast.volume_ids):
        raise ValueError("sample and contrast must be the same size")
    if folds < 2:
        raise ValueError("need at least 2 folds")
    grid = grid or GridSpec()
    ids = list(sample.volume_ids) + list(contrast.volume_ids)
    y = np.array([1] * len(sample.volume_ids) + [0] * len(contrast.volume_ids),
                 dtype=np.float64)
    vocab_full = build_vocabulary(index, max(grid.feature_counts))
    counts = _count_matrix(index, ids, vocab_full)
    assignment = _fold_assignment(y, folds, derive_seed(seed, "folds", sample.label))

    best = None  # (auc, n_features, C)
    for n_features in sorted(grid.feature_counts):
        n_features = min(n_features, vocab_full.size)
        X_freq = _frequency_matrix(counts, n_features, ids)
        for C in sorted(grid.regularization):
            fold_aucs = []
            for fold in range(folds):
                test_mask = assignment == fold
                scaling = FeatureScaling.fit(X_freq[~test_mask])
                X_train = scaling.apply(X_freq[~test_mask])
                X_test = scaling.apply(X_freq[test_mask])
                weights, bias, _ = train_logistic(X_train, y[~test_mask], C)
                fold_aucs.append(
                    auc_score(y[test_mask], _sigmoid_scores(X_test, weights, bias))
                )
            mean_auc = float(np.mean(fold_aucs))
            if best is None or mean_auc > best[0]:
                best = (mean_auc, n_features, C)

    cv_score, n_features, C = best
    vocab = vocab_full.truncated(n_features)
    X_freq = _frequency_matrix(counts, n_features, ids)
    scaling = FeatureScaling.fit(X_freq)
    weights, bias, _ = train_logistic(scaling.apply(X_freq), y, C)
    logger.info("model %s: %d features, C=%g, cv AUC %.3f",
                sample.label, n_features, C, cv_score)
    return TrainedClassifier(
        category=sample.category,
        vocabulary=vocab,
        weights=weights,
        bias=bias,
        regularization=C,
        feature_scaling=scaling,
        train_sample=sample,
        contrast=contrast,
        cv_score=cv_score,
        seed=seed,
    )


def predict_proba(clf: TrainedClassifier, index: CorpusIndex,
                  volume_ids: list[str],
                  overlay: dict[str, VolumeRecord] | None = None) -> np.ndarray:
    """Model probabilities for the given volumes, strictly inside (0, 1).

    ``overlay`` substitutes alternative token counts for selected volumes
    (used by the dilution calibration) without touching the index.
    """
    positions = clf.vocabulary.position_map()
    rows = []
    for vid in volume_ids:
        record = overlay[vid] if overlay and vid in overlay else index.volumes[vid]
        row = _raw_counts(record, positions, clf.vocabulary.size)
        total = row.sum()
        if total == 0:
            raise ValueError(f"volume {vid!r} has no in-vocabulary tokens")
        rows.append(row / total)
    X = clf.feature_scaling.apply(np.stack(rows))
    return _sigmoid_scores(X, clf.weights, clf.bias)


# ---------------------------------------------------------------------------
# Rank statistics and the cross-model distance
# ---------------------------------------------------------------------------

def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Rank correlation: Pearson correlation of average-ranked values."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be equal-length vectors")
    if x.size < 3:
        raise ValueError("need at least 3 observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValueError("rank correlation of a constant vector is undefined")
    rx = average_ranks(x)
    ry = average_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    # elementwise products and a square-root product keep the computation
    # bit-identical under argument swap
    cov = float(np.sum(dx * dy))
    return cov / (math.sqrt(float(np.sum(dx * dx))) * math.sqrt(float(np.sum(dy * dy))))


def fisher_z(rho: float) -> float:
    """arctanh with the clamp that keeps perfect correlations finite."""
    return math.atanh(max(-RHO_CLAMP, min(RHO_CLAMP, rho)))


def rank_agreement_distance(own_a, other_a, own_b, other_b
                            ) -> tuple[float, float, float]:
    """Combine the two ranking agreements into one signed distance.

    own_a/other_a are the two models' scores on the first model's corpus;
    own_b/other_b on the second's. Returns (rho_a, rho_b, distance).
    """
    rho_a = spearman(own_a, other_a)
    rho_b = spearman(own_b, other_b)
    distance = -0.5 * (fisher_z(rho_a) + fisher_z(rho_b))
    return rho_a, rho_b, distance


@dataclass(frozen=True)
class CrossApplication:
    pair: tuple[CategoryLabel, CategoryLabel]
    rho_a: float
    rho_b: float
    distance: float


def scoring_population(clf: TrainedClassifier) -> list[str]:
    """The books a model ranks: its training sample plus its contrast set."""
    return list(clf.train_sample.volume_ids) + list(clf.contrast.volume_ids)


def cross_apply(a: TrainedClassifier, b: TrainedClassifier, index: CorpusIndex,
                overlay: dict[str, VolumeRecord] | None = None
                ) -> CrossApplication:
    """Score each model's books with both models and compare the rankings."""
    if a.category == b.category:
        raise ValueError("self-comparisons are excluded")
    pop_a = scoring_population(a)
    pop_b = scoring_population(b)
    scores = {
        (a.category, "own corpus"): predict_proba(a, index, pop_a, overlay),
        (b.category, f"corpus of {a.category}"): predict_proba(b, index, pop_a, overlay),
        (b.category, "own corpus"): predict_proba(b, index, pop_b, overlay),
        (a.category, f"corpus of {b.category}"): predict_proba(a, index, pop_b, overlay),
    }
    for (model, where), vec in scores.items():
        if np.all(vec == vec[0]):
            raise ValueError(
                f"model {model} produced a constant score vector on "
                f"{where}; rank correlation is undefined")
    rho_a, rho_b, distance = rank_agreement_distance(
        scores[(a.category, "own corpus")],
        scores[(b.category, f"corpus of {a.category}")],
        scores[(b.category, "own corpus")],
        scores[(a.category, f"corpus of {b.category}")],
    )
    return CrossApplication(pair=(a.category, b.category), rho_a=rho_a,
                            rho_b=rho_b, distance=distance)


def model_distance_matrix(classifiers: dict[CategoryLabel, TrainedClassifier],
                          index: CorpusIndex, threads: int = 1
                          ) -> DistanceMatrix:
    """Cross-application distance for every pair of trained models."""
    labels = sorted(classifiers)
    pairs = [(a, b) for i, a in enumerate(labels) for b in labels[i + 1:]]

    def work(pair):
        return pair, cross_apply(classifiers[pair[0]], classifiers[pair[1]], index)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(pool.map(work, pairs))
    else:
        results = dict(work(p) for p in pairs)
    pair_values = {pair: results[pair].distance for pair in pairs}
    return DistanceMatrix.from_pairs(labels, pair_values, method="model-cross")


# ---------------------------------------------------------------------------
# Dilution calibration
# ---------------------------------------------------------------------------

def corpus_unigram_distribution(index: CorpusIndex
                                ) -> tuple[list[str], np.ndarray]:
    """Token list and probabilities of the corpus-wide unigram distribution."""
    totals: Counter[str] = Counter()
    for record in index.volumes.values():
        totals.update(record.tokens)
    tokens = sorted(totals)
    counts = np.array([totals[t] for t in tokens], dtype=np.float64)
    return tokens, counts / counts.sum()


def _dilute_volume(record: VolumeRecord, fraction: float,
                   unigram_tokens: list[str], unigram_p: np.ndarray,
                   rng: np.random.Generator) -> VolumeRecord:
    """Replace a fraction of the volume's tokens with corpus-unigram draws."""
    tokens = sorted(record.tokens)
    counts = np.array([record.tokens[t] for t in tokens], dtype=np.int64)
    total = int(counts.sum())
    n_replace = int(round(fraction * total))
    if n_replace == 0:
        return record
    kept = rng.multivariate_hypergeometric(counts, total - n_replace)
    added = rng.multinomial(n_replace, unigram_p)
    merged: Counter[str] = Counter()
    for token, count in zip(tokens, kept):
        if count:
            merged[token] += int(count)
    for token, count in zip(unigram_tokens, added):
        if count:
            merged[token] += int(count)
    return VolumeRecord(
        volume_id=record.volume_id,
        title_key=record.title_key,
        year=record.year,
        tags=record.tags,
        tokens=dict(sorted(merged.items())),
    )


def dilution_curve(a: TrainedClassifier, b: TrainedClassifier,
                   index: CorpusIndex, fractions: list[float], seed: int
                   ) -> list[tuple[float, float]]:
    """Cross-model distance as each scored volume is progressively diluted.

    For each fraction f, replace f of every scored volume's tokens with
    draws from the corpus unigram distribution and recompute the distance.
    The resulting curve calibrates a measured distance onto an equivalent
    dilution percentage.
    """
    if any(f < 0 or f >= 1 for f in fractions):
        raise ValueError("fractions must lie in [0, 1)")
    unigram_tokens, unigram_p = corpus_unigram_distribution(index)
    volume_ids = sorted(set(scoring_population(a)) | set(scoring_population(b)))
    curve = []
    for i, fraction in enumerate(fractions):
        rng = np.random.default_rng(derive_seed(seed, "dilution", i))
        overlay = {
            vid: _dilute_volume(index.volumes[vid], fraction,
                                unigram_tokens, unigram_p, rng)
            for vid in volume_ids
        }
        result = cross_apply(a, b, index, overlay=overlay)
        curve.append((float(fraction), result.distance))
    return curve


def fit_line(xs, ys) -> tuple[float, float, float]:
    """Least-squares line fit; returns (slope, intercept, r_squared)."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    slope, intercept = np.polyfit(xs, ys, 1)
    predicted = slope * xs + intercept
    ss_res = float(np.sum((ys - predicted) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r_squared
