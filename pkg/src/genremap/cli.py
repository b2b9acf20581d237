"""Command-line interface: one executable, one subcommand per stage.

Category arguments use the "Name:kind" syntax everywhere (kinds: genre,
subject, audience, form) so homonyms like Humor-the-genre and
Humor-the-subject stay distinct. All tabular outputs are CSV with a header
row; report figures are rendered next to the delimited output.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import __version__
from . import evaluation, lexical, social, supervised, topics
from .corpus import CategoryLabel, CorpusIndex, IngestConfig, ingest_corpus
from .embedding import mds_embed, mean_publication_dates
from .errors import GenremapError
from .matrix import DistanceMatrix
from .pipeline import run_pipeline, slugify
from .sampling import MatchedContrast, Sample, draw_category_sample, \
    draw_matched_contrast
from .seeding import derive_seed
from .synth import SynthSpec, generate


def _category(value: str) -> CategoryLabel:
    try:
        return CategoryLabel.parse(value)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc


@click.group()
@click.version_option(version=__version__, prog_name="genremap")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Master seed; per-command seeds override it.")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Worker threads for parallelizable stages.")
@click.option("--out-dir", type=click.Path(path_type=Path), default=None,
              help="Base directory for outputs (pipeline only).")
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
@click.pass_context
def main(ctx, seed, threads, out_dir, verbose):
    """Measure social and textual distances between document categories."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    ctx.ensure_object(dict)
    ctx.obj.update(seed=seed, threads=threads, out_dir=out_dir)


def _seed(ctx, override):
    return override if override is not None else ctx.obj["seed"]


@main.command()
@click.option("--metadata", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--features", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--head-trim", type=float, default=0.10, show_default=True)
@click.option("--tail-trim", type=float, default=0.05, show_default=True)
@click.option("--year-min", type=int, default=1700, show_default=True)
@click.option("--year-max", type=int, default=2020, show_default=True)
@click.pass_context
def ingest(ctx, metadata, features, out, head_trim, tail_trim, year_min, year_max):
    """Build a corpus index from metadata and per-volume count files."""
    config = IngestConfig(head_trim=head_trim, tail_trim=tail_trim,
                          year_min=year_min, year_max=year_max)
    index = ingest_corpus(metadata, features, config,
                          threads=ctx.obj["threads"])
    index.save(out)
    for warning in index.warnings:
        click.echo(f"warning: {warning}", err=True)
    click.echo(f"indexed {index.n_volumes} volumes "
               f"({len(index.warnings)} warnings) -> {out}")


@main.command()
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--category", required=True)
@click.option("--n", type=int, default=100, show_default=True)
@click.option("--seed", "seed_opt", type=int, default=None)
@click.option("--exclude", multiple=True,
              help="Category (Name:kind) no sampled volume may carry; repeatable.")
@click.option("--allow-short", is_flag=True,
              help="Accept the largest feasible sample when n is infeasible.")
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--contrast-out", type=click.Path(path_type=Path), default=None,
              help="Also draw a date-matched contrast set to this path.")
@click.pass_context
def sample(ctx, index_path, category, n, seed_opt, exclude, allow_short, out,
           contrast_out):
    """Draw a random sample of one category's volumes."""
    index = CorpusIndex.load(index_path)
    label = _category(category)
    seed = _seed(ctx, seed_opt)
    drawn = draw_category_sample(
        index, label, n, derive_seed(seed, "sample", str(label)),
        exclusions=frozenset(_category(e) for e in exclude),
        allow_short=allow_short)
    drawn.save(out)
    click.echo(f"sampled {len(drawn.volume_ids)} volumes of {label} -> {out}")
    if contrast_out:
        contrast = draw_matched_contrast(
            index, drawn, pool_exclusions=frozenset({label}),
            seed=derive_seed(seed, "contrast", str(label)))
        contrast.save(contrast_out)
        click.echo(f"matched contrast -> {contrast_out}")


def _read_categories(path: Path) -> list[CategoryLabel]:
    return [CategoryLabel.parse(line.strip())
            for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip()]


@main.command()
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--categories", required=True,
              type=click.Path(exists=True, path_type=Path),
              help="Text file with one Name:kind label per line.")
@click.option("--priors", type=click.Path(exists=True, path_type=Path),
              default=None, help="JSON prior table to blend in.")
@click.option("--default-priors", is_flag=True,
              help="Build priors for same-name genre/subject pairs.")
@click.option("--blend-weight", type=float, default=0.5, show_default=True)
@click.option("--smoothing", type=float, default=0.1, show_default=True)
@click.option("--t-multiplier", type=int, default=10, show_default=True)
@click.option("--seed", "seed_opt", type=int, default=None)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.pass_context
def pmi(ctx, index_path, categories, priors, default_priors, blend_weight,
        smoothing, t_multiplier, seed_opt, out):
    """Social distance matrix from smoothed, date-matched PMI."""
    index = CorpusIndex.load(index_path)
    labels = _read_categories(categories)
    records = social.compute_pairwise_pmi(
        index, labels, _seed(ctx, seed_opt), smoothing=smoothing,
        t_multiplier=t_multiplier, threads=ctx.obj["threads"])
    stats = social.overlap_stats(index, records)
    if priors:
        table = social.PriorTable.from_json(
            json.loads(Path(priors).read_text(encoding="utf-8")))
        records = social.apply_priors(records, table)
    elif default_priors:
        table = social.default_prior_table(records, blend_weight=blend_weight)
        records = social.apply_priors(records, table)
    matrix = social.social_distance_matrix(records, labels)
    matrix.to_csv(out)
    click.echo(f"{stats['n_pairs']} pairs; zero overlap within t: "
               f"{stats['zero_overlap_within_t']}, corpus-wide: "
               f"{stats['zero_overlap_corpus']}")
    click.echo(f"social distances -> {out}")


def _load_samples(samples_dir: Path) -> dict[CategoryLabel, Sample]:
    samples = {}
    for path in sorted(samples_dir.glob("*.sample.json")):
        loaded = Sample.load(path)
        if loaded.category is None:
            raise click.ClickException(f"{path}: sample has no category")
        samples[loaded.category] = loaded
    if not samples:
        raise click.ClickException(f"no *.sample.json files in {samples_dir}")
    return samples


def _load_contrasts(samples_dir: Path) -> dict[CategoryLabel, MatchedContrast]:
    contrasts = {}
    for path in sorted(samples_dir.glob("*.contrast.json")):
        loaded = MatchedContrast.load(path)
        contrasts[loaded.target.category] = loaded
    return contrasts


@main.command()
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--samples", "samples_dir", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--top-k", type=int, default=10000, show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
def tfidf(index_path, samples_dir, top_k, out):
    """Distance matrix from cosine over aggregate tf-idf vectors."""
    index = CorpusIndex.load(index_path)
    samples = _load_samples(Path(samples_dir))
    vocab = lexical.build_vocabulary(index, top_k)
    matrix = lexical.tfidf_distance_matrix(index, samples, vocab)
    matrix.to_csv(out)
    click.echo(f"tf-idf distances over {len(samples)} categories -> {out}")


@main.group(name="topics")
def topics_group():
    """Topic model fitting and topic-vector distances."""


@topics_group.command("fit")
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--samples", "samples_dir", default=None,
              type=click.Path(exists=True, path_type=Path),
              help="Fit on sampled volumes only (default: all volumes).")
@click.option("--k", type=int, default=100, show_default=True)
@click.option("--iterations", type=int, default=500, show_default=True)
@click.option("--alpha", type=float, default=0.1, show_default=True)
@click.option("--beta", type=float, default=0.01, show_default=True)
@click.option("--seed", "seed_opt", type=int, default=None)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.pass_context
def topics_fit(ctx, index_path, samples_dir, k, iterations, alpha, beta,
               seed_opt, out):
    """Fit the topic model by collapsed Gibbs sampling."""
    index = CorpusIndex.load(index_path)
    if samples_dir:
        samples = _load_samples(Path(samples_dir))
        contrasts = _load_contrasts(Path(samples_dir))
        ids = sorted({vid for s in samples.values() for vid in s.volume_ids}
                     | {vid for c in contrasts.values() for vid in c.volume_ids})
    else:
        ids = sorted(index.volumes)
    model = topics.fit_lda(index, ids, k, alpha=alpha, beta=beta,
                           iterations=iterations, seed=_seed(ctx, seed_opt))
    model.save(out)
    click.echo(f"fit {k} topics on {len(model.doc_topic)} volumes -> {out}")


@topics_group.command("distance")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--samples", "samples_dir", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--strategy", type=click.Choice(["summed", "symdiff", "centered"]),
              default="summed", show_default=True)
@click.option("--window", type=int, default=5, show_default=True,
              help="Half-width in years of the time-centering window.")
@click.option("--n", type=int, default=100, show_default=True,
              help="Sample size for symmetric-difference draws.")
@click.option("--seed", "seed_opt", type=int, default=None)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.pass_context
def topics_distance(ctx, model_path, index_path, samples_dir, strategy, window,
                    n, seed_opt, out):
    """Distance matrix from topic vectors under one strategy."""
    index = CorpusIndex.load(index_path)
    model = topics.TopicModel.load(model_path)
    samples = _load_samples(Path(samples_dir))
    labels = sorted(samples)
    if strategy == "summed":
        vectors = {label: topics.summed_vector(model, samples[label])
                   for label in labels}
        matrix = topics.topic_distance_matrix(vectors, "summed")
    elif strategy == "centered":
        centered = topics.time_center(model, index, window)
        vectors = {label: topics.centered_vector(model, index, samples[label],
                                                 window, centered)
                   for label in labels}
        matrix = topics.topic_distance_matrix(vectors, "time_centered")
    else:
        seed = _seed(ctx, seed_opt)
        pair_vectors = {}
        for i, a in enumerate(labels):
            for b in labels[i + 1:]:
                try:
                    pair_vectors[(a, b)] = topics.symdiff_vectors(
                        model, index, a, b, n, derive_seed(seed, "symdiff"))
                except GenremapError as exc:
                    click.echo(f"warning: symdiff ({a}, {b}): {exc}", err=True)
        matrix = topics.topic_distance_matrix(pair_vectors, "symdiff",
                                              labels=labels, missing="nan")
    matrix.to_csv(out)
    click.echo(f"topic distances ({matrix.method}) -> {out}")


@main.group(name="supervised")
def supervised_group():
    """Per-category classifiers and the cross-model distance."""


@supervised_group.command("train")
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--samples", "samples_dir", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--feature-counts", default="500,1000,2000,4000,8000",
              show_default=True)
@click.option("--regularization", default="0.001,0.01,0.1,1,10",
              show_default=True)
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--seed", "seed_opt", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.pass_context
def supervised_train(ctx, index_path, samples_dir, feature_counts,
                     regularization, folds, seed_opt, out_dir):
    """Grid-search one classifier per category against its matched contrast."""
    index = CorpusIndex.load(index_path)
    samples = _load_samples(Path(samples_dir))
    contrasts = _load_contrasts(Path(samples_dir))
    grid = supervised.GridSpec(
        feature_counts=[int(x) for x in feature_counts.split(",")],
        regularization=[float(x) for x in regularization.split(",")])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = _seed(ctx, seed_opt)
    for label in sorted(samples):
        if label not in contrasts:
            raise click.ClickException(f"no contrast set for {label}")
        clf = supervised.train_genre_model(
            index, samples[label], contrasts[label], grid, folds=folds,
            seed=derive_seed(seed, "supervised", str(label)))
        clf_path = out / f"{slugify(label)}.pkl"
        clf.save(clf_path)
        click.echo(f"{label}: {clf.vocabulary.size} features, "
                   f"C={clf.regularization:g}, cv AUC {clf.cv_score:.3f}")


def _load_models(models_dir: Path):
    classifiers = {}
    for path in sorted(models_dir.glob("*.pkl")):
        clf = supervised.TrainedClassifier.load(path)
        classifiers[clf.category] = clf
    if not classifiers:
        raise click.ClickException(f"no *.pkl classifiers in {models_dir}")
    return classifiers


@supervised_group.command("distance")
@click.option("--models", "models_dir", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.pass_context
def supervised_distance(ctx, models_dir, index_path, out):
    """Cross-application distance matrix over all trained models."""
    index = CorpusIndex.load(index_path)
    classifiers = _load_models(Path(models_dir))
    matrix = supervised.model_distance_matrix(classifiers, index,
                                              threads=ctx.obj["threads"])
    matrix.to_csv(out)
    click.echo(f"cross-model distances over {len(classifiers)} models -> {out}")


@supervised_group.command("dilution")
@click.option("--models", "models_dir", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--index", "index_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--pair", required=True,
              help='Two categories, e.g. "Fantasy:genre,Science fiction:genre".')
@click.option("--fractions", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8",
              show_default=True)
@click.option("--seed", "seed_opt", type=int, default=None)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--plot", "plot_path", type=click.Path(path_type=Path),
              default=None, help="Also render the calibration curve (SVG).")
@click.pass_context
def supervised_dilution(ctx, models_dir, index_path, pair, fractions, seed_opt,
                        out, plot_path):
    """Distance vs random-dilution calibration curve for one model pair."""
    index = CorpusIndex.load(index_path)
    classifiers = _load_models(Path(models_dir))
    try:
        label_a, label_b = (_category(part.strip()) for part in pair.split(","))
    except ValueError as exc:
        raise click.BadParameter(f"--pair: {exc}") from exc
    for label in (label_a, label_b):
        if label not in classifiers:
            raise click.ClickException(f"no trained model for {label}")
    fraction_values = [float(x) for x in fractions.split(",")]
    curve = supervised.dilution_curve(
        classifiers[label_a], classifiers[label_b], index, fraction_values,
        _seed(ctx, seed_opt))
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("fraction,distance\n")
        for fraction, distance in curve:
            fh.write(f"{fraction!r},{distance!r}\n")
    slope, intercept, r_squared = supervised.fit_line(
        [c[0] for c in curve], [c[1] for c in curve])
    click.echo(f"linear fit: slope {slope:.4f}, intercept {intercept:.4f}, "
               f"R^2 {r_squared:.4f}")
    click.echo(f"dilution curve -> {out}")
    if plot_path:
        from .plotting import render_dilution_curve
        render_dilution_curve(curve, plot_path,
                              pair_label=f"{label_a.name} vs {label_b.name}")
        click.echo(f"figure -> {plot_path}")


@main.command()
@click.option("--social", "social_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--textual", "textual_paths", required=True, multiple=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--level", type=float, default=0.95, show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--bars", "bars_path", type=click.Path(path_type=Path),
              default=None, help="Render a bar chart with CI error bars (SVG).")
def evaluate(social_path, textual_paths, level, out, bars_path):
    """Correlate textual distance matrices with the social benchmark."""
    social_matrix = DistanceMatrix.from_csv(social_path)
    textual = [DistanceMatrix.from_csv(p) for p in textual_paths]
    harmonized = evaluation.harmonize_exclusions(textual)
    reports = [evaluation.correlate(m, social_matrix, level)
               for m in harmonized]
    comparison = evaluation.compare_methods(reports) if len(reports) > 1 else \
        evaluation.MethodComparison(ranking=reports, overlaps=[])
    evaluation.write_report(out, comparison)
    for report in comparison.ranking:
        click.echo(f"{report.method}: r={report.r:.4f} "
                   f"[{report.ci_low:.4f}, {report.ci_high:.4f}] "
                   f"n={report.n_pairs}")
    click.echo(f"report -> {out}")
    if bars_path:
        from .plotting import render_method_bars
        render_method_bars(reports, bars_path)
        click.echo(f"figure -> {bars_path}")


@main.command()
@click.option("--distances", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--index", "index_path", default=None,
              type=click.Path(exists=True, path_type=Path),
              help="With --samples, colors points by mean publication date.")
@click.option("--samples", "samples_dir", default=None,
              type=click.Path(exists=True, path_type=Path))
@click.option("--dims", type=int, default=2, show_default=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--svg", "svg_path", type=click.Path(path_type=Path), default=None)
def mds(distances, index_path, samples_dir, dims, out, svg_path):
    """Project a distance matrix to 2D coordinates (and optionally a map)."""
    matrix = DistanceMatrix.from_csv(distances)
    dates = None
    if index_path and samples_dir:
        index = CorpusIndex.load(index_path)
        samples = _load_samples(Path(samples_dir))
        dates = mean_publication_dates(index, samples)
    result = mds_embed(matrix, dims=dims, mean_dates=dates)
    result.to_csv(out)
    for warning in result.warnings:
        click.echo(f"warning: {warning}", err=True)
    if result.shift_applied:
        click.echo(f"shift applied to off-diagonal entries: "
                   f"{result.shift_applied!r}")
    click.echo(f"coordinates -> {out}")
    if svg_path:
        from .plotting import render_map
        render_map(result, svg_path, title=f"category map ({matrix.method})")
        click.echo(f"map -> {svg_path}")


@main.command()
@click.option("--spec", "spec_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--out-dir", "out_dir", required=True,
              type=click.Path(path_type=Path))
def synth(spec_path, out_dir):
    """Generate a synthetic corpus with ground-truth distances."""
    spec = SynthSpec.load(spec_path)
    paths = generate(spec, out_dir)
    click.echo(f"generated {spec.n_volumes} volumes, "
               f"{spec.n_categories} categories -> {out_dir}")
    click.echo(f"truth -> {paths['truth']}")


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--seed", "seed_opt", type=int, default=None,
              help="Override the config's master seed.")
@click.pass_context
def pipeline(ctx, config_path, seed_opt):
    """Run every stage in dependency order, with a run manifest."""
    out_dir = ctx.obj["out_dir"] or Path("genremap_run")
    try:
        manifest = run_pipeline(config_path, out_dir, seed=seed_opt,
                                threads=ctx.obj["threads"])
    except GenremapError as exc:
        raise click.ClickException(str(exc)) from exc
    for warning in manifest.warnings:
        click.echo(f"warning: {warning}", err=True)
    click.echo(f"pipeline complete -> {out_dir} "
               f"({len(manifest.stages)} stages, manifest.json written)")


def _entrypoint():
    try:
        main(obj={})
    except GenremapError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    _entrypoint()
