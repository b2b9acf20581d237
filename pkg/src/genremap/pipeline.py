"""End-to-end pipeline: ingest through evaluation and maps, with a manifest.

The config is an INI-style file with one section per stage (see README for
the schema). All randomness flows from [run].seed via per-stage derived
seeds, so rerunning a config reproduces byte-identical artifacts.
"""

from __future__ import annotations

import configparser
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import evaluation, lexical, plotting, social, supervised, topics
from .corpus import CategoryLabel, CorpusIndex, IngestConfig, ingest_corpus
from .embedding import mds_embed, mean_publication_dates
from .errors import ConfigError, ShortfallError
from .manifest import RunManifest, output_lock
from .matrix import DistanceMatrix
from .sampling import Sample, draw_category_sample, draw_matched_contrast, \
    symmetric_difference_samples
from .seeding import derive_seed

logger = logging.getLogger(__name__)


def slugify(label: CategoryLabel) -> str:
    name = re.sub(r"[^0-9A-Za-z]+", "_", label.name).strip("_").lower()
    return f"{name}__{label.kind}"


@dataclass
class PipelineConfig:
    seed: int
    categories: list[CategoryLabel]
    metadata: Path
    features: Path
    head_trim: float = 0.10
    tail_trim: float = 0.05
    year_min: int = 1700
    year_max: int = 2020
    sample_n: int = 100
    allow_short: bool = False
    pmi_smoothing: float = 0.1
    pmi_t_multiplier: int = 10
    default_priors: bool = False
    prior_blend_weight: float = 0.5
    priors_path: Path | None = None
    tfidf_top_k: int = 10000
    topics_k: int = 100
    topics_iterations: int = 500
    topics_alpha: float = 0.1
    topics_beta: float = 0.01
    topics_window: int = 5
    topic_strategies: list[str] = field(
        default_factory=lambda: ["summed", "symdiff", "centered"])
    feature_counts: list[int] = field(
        default_factory=lambda: [500, 1000, 2000, 4000, 8000])
    regularization: list[float] = field(
        default_factory=lambda: [0.001, 0.01, 0.1, 1.0, 10.0])
    folds: int = 5
    ci_level: float = 0.95
    mds_source: str = "model_dist"
    mds_dims: int = 2

    def as_dict(self) -> dict:
        out = {}
        for key, value in self.__dict__.items():
            if isinstance(value, Path):
                out[key] = str(value)
            elif isinstance(value, list) and value and \
                    isinstance(value[0], CategoryLabel):
                out[key] = [str(v) for v in value]
            else:
                out[key] = value
        return out


def _get(parser, section, option, cast, default=None, required=False):
    if not parser.has_option(section, option):
        if required:
            raise ConfigError(f"{section}.{option}: required option is missing")
        return default
    raw = parser.get(section, option)
    try:
        return cast(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{section}.{option}: {exc}") from exc


def _bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _split(raw: str) -> list[str]:
    return [part.strip() for part in re.split(r"[,\n]", raw) if part.strip()]


def load_config(path: str | Path) -> PipelineConfig:
    """Parse and validate a pipeline config; ConfigError names bad fields."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config: file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from exc

    raw_categories = _get(parser, "run", "categories", _split)
    categories_file = _get(parser, "run", "categories_file", str)
    if raw_categories is None and categories_file is None:
        raise ConfigError("run.categories: required (or run.categories_file)")
    if raw_categories is None:
        cat_path = Path(categories_file)
        if not cat_path.is_absolute():
            cat_path = path.parent / cat_path
        if not cat_path.is_file():
            raise ConfigError(f"run.categories_file: file not found: {cat_path}")
        raw_categories = [line.strip() for line in
                          cat_path.read_text(encoding="utf-8").splitlines()
                          if line.strip()]
    try:
        categories = [CategoryLabel.parse(c) for c in raw_categories]
    except ValueError as exc:
        raise ConfigError(f"run.categories: {exc}") from exc
    if len(categories) < 2:
        raise ConfigError("run.categories: need at least 2 categories")

    def resolve(raw: str) -> Path:
        p = Path(raw)
        return p if p.is_absolute() else path.parent / p

    metadata = _get(parser, "corpus", "metadata", resolve, required=True)
    features = _get(parser, "corpus", "features", resolve, required=True)
    if not metadata.is_file():
        raise ConfigError(f"corpus.metadata: file not found: {metadata}")
    if not features.is_dir():
        raise ConfigError(f"corpus.features: directory not found: {features}")

    priors_raw = _get(parser, "pmi", "priors", str)
    priors_path = resolve(priors_raw) if priors_raw else None
    if priors_path and not priors_path.is_file():
        raise ConfigError(f"pmi.priors: file not found: {priors_path}")

    strategies = _get(parser, "topics", "strategies", _split,
                      default=["summed", "symdiff", "centered"])
    for strategy in strategies:
        if strategy not in ("summed", "symdiff", "centered"):
            raise ConfigError(f"topics.strategies: unknown strategy {strategy!r}")

    config = PipelineConfig(
        seed=_get(parser, "run", "seed", int, default=0),
        categories=categories,
        metadata=metadata,
        features=features,
        head_trim=_get(parser, "corpus", "head_trim", float, default=0.10),
        tail_trim=_get(parser, "corpus", "tail_trim", float, default=0.05),
        year_min=_get(parser, "corpus", "year_min", int, default=1700),
        year_max=_get(parser, "corpus", "year_max", int, default=2020),
        sample_n=_get(parser, "sampling", "n", int, default=100),
        allow_short=_get(parser, "sampling", "allow_short", _bool, default=False),
        pmi_smoothing=_get(parser, "pmi", "smoothing", float, default=0.1),
        pmi_t_multiplier=_get(parser, "pmi", "t_multiplier", int, default=10),
        default_priors=_get(parser, "pmi", "default_priors", _bool, default=False),
        prior_blend_weight=_get(parser, "pmi", "blend_weight", float, default=0.5),
        priors_path=priors_path,
        tfidf_top_k=_get(parser, "tfidf", "top_k", int, default=10000),
        topics_k=_get(parser, "topics", "k", int, default=100),
        topics_iterations=_get(parser, "topics", "iterations", int, default=500),
        topics_alpha=_get(parser, "topics", "alpha", float, default=0.1),
        topics_beta=_get(parser, "topics", "beta", float, default=0.01),
        topics_window=_get(parser, "topics", "window", int, default=5),
        topic_strategies=strategies,
        feature_counts=_get(parser, "supervised", "feature_counts",
                            lambda raw: [int(x) for x in _split(raw)],
                            default=[500, 1000, 2000, 4000, 8000]),
        regularization=_get(parser, "supervised", "regularization",
                            lambda raw: [float(x) for x in _split(raw)],
                            default=[0.001, 0.01, 0.1, 1.0, 10.0]),
        folds=_get(parser, "supervised", "folds", int, default=5),
        ci_level=_get(parser, "evaluate", "level", float, default=0.95),
        mds_source=_get(parser, "mds", "source", str, default="model_dist"),
        mds_dims=_get(parser, "mds", "dims", int, default=2),
    )
    if not 0 < config.ci_level < 1:
        raise ConfigError("evaluate.level: must lie strictly between 0 and 1")
    valid_sources = ("model_dist", "tfidf", "topic_summed", "topic_symdiff",
                     "topic_centered", "social")
    if config.mds_source not in valid_sources:
        raise ConfigError(
            f"mds.source: {config.mds_source!r} is not one of {valid_sources}")
    return config


def run_pipeline(config_path: str | Path, out_dir: str | Path,
                 seed: int | None = None, threads: int = 1) -> RunManifest:
    """Execute all stages in dependency order, writing a manifest.

    On stage failure, artifacts already produced are retained and the
    manifest records the failure point before the exception propagates.
    """
    config = load_config(config_path)
    if seed is not None:
        config.seed = seed
    out = Path(out_dir)
    manifest = RunManifest(master_seed=config.seed, config=config.as_dict(),
                           root=out)
    manifest_path = out / "manifest.json"

    with output_lock(out):
        try:
            _run_stages(config, out, manifest, threads)
        except Exception as exc:
            manifest.record_failure(getattr(exc, "_stage", "unknown"), str(exc))
            manifest.save(manifest_path)
            raise
        manifest.save(manifest_path)
    return manifest


def _stage(name):
    """Tag exceptions with the stage they arose in, for the manifest."""
    class _StageContext:
        def __enter__(self):
            logger.info("stage %s", name)
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not hasattr(exc, "_stage"):
                exc._stage = name
            return False
    return _StageContext()


def _run_stages(config: PipelineConfig, out: Path, manifest: RunManifest,
                threads: int) -> None:
    master = config.seed
    matrices: dict[str, DistanceMatrix] = {}

    with _stage("ingest"):
        ingest_cfg = IngestConfig(
            head_trim=config.head_trim, tail_trim=config.tail_trim,
            year_min=config.year_min, year_max=config.year_max)
        index = ingest_corpus(config.metadata, config.features, ingest_cfg,
                              threads=threads)
        index_path = out / "index.bin"
        index.save(index_path)
        manifest.record_stage("ingest", inputs=[config.metadata],
                              outputs=[index_path], warnings=index.warnings)

    with _stage("sample"):
        samples_dir = out / "samples"
        samples_dir.mkdir(exist_ok=True)
        samples: dict[CategoryLabel, Sample] = {}
        contrasts = {}
        sample_files = []
        for label in config.categories:
            sample = draw_category_sample(
                index, label, config.sample_n,
                derive_seed(master, "sample", str(label)),
                allow_short=config.allow_short)
            if len(sample.volume_ids) < config.sample_n:
                manifest.warnings.append(
                    f"sample {label}: only {len(sample.volume_ids)} of "
                    f"{config.sample_n} volumes available")
            contrast = draw_matched_contrast(
                index, sample, pool_exclusions=frozenset({label}),
                seed=derive_seed(master, "contrast", str(label)))
            samples[label] = sample
            contrasts[label] = contrast
            sample_path = samples_dir / f"{slugify(label)}.sample.json"
            contrast_path = samples_dir / f"{slugify(label)}.contrast.json"
            sample.save(sample_path)
            contrast.save(contrast_path)
            sample_files += [sample_path, contrast_path]
        manifest.record_stage("sample", outputs=sample_files)

    with _stage("pmi"):
        records = social.compute_pairwise_pmi(
            index, config.categories, derive_seed(master, "pmi"),
            smoothing=config.pmi_smoothing,
            t_multiplier=config.pmi_t_multiplier, threads=threads)
        stats = social.overlap_stats(index, records)
        if config.priors_path:
            priors = social.PriorTable.from_json(
                json.loads(config.priors_path.read_text(encoding="utf-8")))
            records = social.apply_priors(records, priors)
        elif config.default_priors:
            priors = social.default_prior_table(
                records, blend_weight=config.prior_blend_weight)
            records = social.apply_priors(records, priors)
        matrices["social"] = social.social_distance_matrix(
            records, config.categories)
        social_path = out / "social.csv"
        matrices["social"].to_csv(social_path)
        stats_path = out / "social_stats.json"
        stats_path.write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")
        manifest.record_stage("pmi", outputs=[social_path, stats_path])

    with _stage("tfidf"):
        vocab = lexical.build_vocabulary(index, config.tfidf_top_k)
        matrices["tfidf"] = lexical.tfidf_distance_matrix(index, samples, vocab)
        tfidf_path = out / "tfidf.csv"
        matrices["tfidf"].to_csv(tfidf_path)
        manifest.record_stage("tfidf", outputs=[tfidf_path])

    with _stage("topics"):
        warnings = []
        # symmetric-difference samples are drawn before fitting so the
        # balanced modeling corpus covers every volume any strategy scores
        symdiff_samples = {}
        if "symdiff" in config.topic_strategies:
            for i, a in enumerate(config.categories):
                for b in config.categories[i + 1:]:
                    try:
                        symdiff_samples[(a, b)] = symmetric_difference_samples(
                            index, a, b, config.sample_n,
                            derive_seed(master, "symdiff"))
                    except ShortfallError as exc:
                        warnings.append(f"symdiff ({a}, {b}): {exc}")
        modeled_ids = sorted(
            {vid for s in samples.values() for vid in s.volume_ids}
            | {vid for c in contrasts.values() for vid in c.volume_ids}
            | {vid for pair in symdiff_samples.values()
               for s in pair for vid in s.volume_ids})
        model = topics.fit_lda(
            index, modeled_ids, config.topics_k,
            alpha=config.topics_alpha, beta=config.topics_beta,
            iterations=config.topics_iterations,
            seed=derive_seed(master, "topics"))
        model_path = out / "topic_model.bin"
        model.save(model_path)
        topic_paths = [model_path]
        if "summed" in config.topic_strategies:
            vectors = {label: topics.summed_vector(model, samples[label])
                       for label in config.categories}
            matrices["topic_summed"] = topics.topic_distance_matrix(
                vectors, "summed")
            p = out / "topic_summed.csv"
            matrices["topic_summed"].to_csv(p)
            topic_paths.append(p)
        if "symdiff" in config.topic_strategies:
            pair_vectors = {
                pair: topics.symdiff_vectors_from_samples(model, sa, sb, pair)
                for pair, (sa, sb) in symdiff_samples.items()}
            matrices["topic_symdiff"] = topics.topic_distance_matrix(
                pair_vectors, "symdiff", labels=config.categories,
                missing="nan")
            p = out / "topic_symdiff.csv"
            matrices["topic_symdiff"].to_csv(p)
            topic_paths.append(p)
        if "centered" in config.topic_strategies:
            centered = topics.time_center(model, index, config.topics_window)
            vectors = {
                label: topics.centered_vector(model, index, samples[label],
                                              config.topics_window, centered)
                for label in config.categories}
            matrices["topic_centered"] = topics.topic_distance_matrix(
                vectors, "time_centered")
            p = out / "topic_centered.csv"
            matrices["topic_centered"].to_csv(p)
            topic_paths.append(p)
        manifest.record_stage("topics", outputs=topic_paths, warnings=warnings)

    with _stage("supervised"):
        models_dir = out / "models"
        models_dir.mkdir(exist_ok=True)
        grid = supervised.GridSpec(feature_counts=config.feature_counts,
                                   regularization=config.regularization)
        classifiers = {}
        model_files = []
        for label in config.categories:
            clf = supervised.train_genre_model(
                index, samples[label], contrasts[label], grid,
                folds=config.folds,
                seed=derive_seed(master, "supervised", str(label)))
            classifiers[label] = clf
            clf_path = models_dir / f"{slugify(label)}.pkl"
            clf.save(clf_path)
            model_files.append(clf_path)
        matrices["model_dist"] = supervised.model_distance_matrix(
            classifiers, index, threads=threads)
        model_dist_path = out / "model_dist.csv"
        matrices["model_dist"].to_csv(model_dist_path)
        manifest.record_stage("supervised",
                              outputs=model_files + [model_dist_path])

    with _stage("evaluate"):
        textual_names = [name for name in
                         ("tfidf", "topic_summed", "topic_symdiff",
                          "topic_centered", "model_dist") if name in matrices]
        harmonized = evaluation.harmonize_exclusions(
            [matrices[name] for name in textual_names])
        reports = [evaluation.correlate(m, matrices["social"], config.ci_level)
                   for m in harmonized]
        comparison = evaluation.compare_methods(reports)
        report_path = out / "report.json"
        evaluation.write_report(report_path, comparison)
        bars_path = out / "report.svg"
        plotting.render_method_bars(reports, bars_path)
        manifest.record_stage("evaluate", outputs=[report_path, bars_path])

    with _stage("mds"):
        source = matrices[config.mds_source]
        dates = mean_publication_dates(index, samples)
        result = mds_embed(source, dims=config.mds_dims, mean_dates=dates)
        coords_path = out / "coords.csv"
        result.to_csv(coords_path)
        map_path = out / "map.svg"
        plotting.render_map(result, map_path,
                            title=f"category map ({source.method})")
        manifest.record_stage("mds", outputs=[coords_path, map_path],
                              warnings=result.warnings)
