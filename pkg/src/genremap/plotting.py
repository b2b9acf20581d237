"""Figure rendering for category maps and method comparisons.

Output bytes are deterministic for fixed inputs: the SVG hash salt is
pinned and the creation date is stripped, so rerunning a pipeline with the
same seed reproduces identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .embedding import EmbeddingResult  # noqa: E402
from .evaluation import EvalReport  # noqa: E402

_HASH_SALT = "genremap"


def _save(fig, path: str | Path) -> None:
    path = Path(path)
    with matplotlib.rc_context({"svg.hashsalt": _HASH_SALT}):
        if path.suffix.lower() == ".svg":
            fig.savefig(path, metadata={"Date": None})
        else:
            fig.savefig(path)
    plt.close(fig)


def render_map(result: EmbeddingResult, out: str | Path,
               title: str | None = None) -> None:
    """Scatter the embedded categories, colored by mean publication date."""
    fig, ax = plt.subplots(figsize=(8.0, 6.4))
    xs = result.coords[:, 0]
    ys = result.coords[:, 1]
    dates = None
    if result.mean_dates:
        dates = [result.mean_dates.get(label) for label in result.labels]
        if any(d is None for d in dates):
            dates = None
    if dates is not None and max(dates) > min(dates):
        scatter = ax.scatter(xs, ys, c=dates, cmap="viridis", s=42,
                             edgecolors="black", linewidths=0.4, zorder=3)
        bar = fig.colorbar(scatter, ax=ax)
        bar.set_label("mean publication year")
    elif dates is not None:
        ax.scatter(xs, ys, color="#3b6b8f", s=42, edgecolors="black",
                   linewidths=0.4, zorder=3)
        ax.annotate(f"all categories: {dates[0]:.0f}", xy=(0.02, 0.02),
                    xycoords="axes fraction", fontsize=8, color="gray")
    else:
        ax.scatter(xs, ys, color="#3b6b8f", s=42, edgecolors="black",
                   linewidths=0.4, zorder=3)
    for i, label in enumerate(result.labels):
        ax.annotate(label.name, (xs[i], ys[i]), xytext=(4, 4),
                    textcoords="offset points", fontsize=8)
    ax.set_xlabel("dimension 1")
    ax.set_ylabel("dimension 2")
    ax.set_title(title or "category map")
    ax.axhline(0, color="0.85", linewidth=0.6, zorder=1)
    ax.axvline(0, color="0.85", linewidth=0.6, zorder=1)
    fig.tight_layout()
    _save(fig, out)


def render_method_bars(reports: list[EvalReport], out: str | Path,
                       title: str | None = None) -> None:
    """Bar chart of per-method correlations with CI error bars."""
    ordered = sorted(reports, key=lambda rep: -rep.r)
    names = [rep.method for rep in ordered]
    values = [rep.r for rep in ordered]
    err_low = [rep.r - rep.ci_low for rep in ordered]
    err_high = [rep.ci_high - rep.r for rep in ordered]
    fig, ax = plt.subplots(figsize=(7.2, 4.8))
    positions = range(len(ordered))
    ax.bar(positions, values, width=0.6, color="#7296b8",
           edgecolor="black", linewidth=0.6, zorder=2)
    ax.errorbar(positions, values, yerr=[err_low, err_high], fmt="none",
                ecolor="black", capsize=4, linewidth=1.0, zorder=3)
    ax.set_xticks(list(positions))
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("Pearson r vs social distance")
    ax.set_title(title or "method agreement with the social benchmark")
    ax.grid(axis="y", color="0.9", linewidth=0.6, zorder=0)
    fig.tight_layout()
    _save(fig, out)


def render_dilution_curve(curve: list[tuple[float, float]], out: str | Path,
                          pair_label: str = "") -> None:
    """Distance vs dilution fraction with its least-squares line."""
    from .supervised import fit_line

    xs = [point[0] for point in curve]
    ys = [point[1] for point in curve]
    slope, intercept, r_squared = fit_line(xs, ys)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    ax.plot(xs, ys, "o-", color="#3b6b8f", zorder=3)
    ax.plot(xs, [slope * x + intercept for x in xs], "--", color="gray",
            label=f"linear fit (R$^2$={r_squared:.3f})", zorder=2)
    ax.set_xlabel("fraction of tokens randomly replaced")
    ax.set_ylabel("cross-model distance")
    title = "distance vs dilution"
    if pair_label:
        title += f": {pair_label}"
    ax.set_title(title)
    ax.legend()
    ax.grid(color="0.9", linewidth=0.6, zorder=0)
    fig.tight_layout()
    _save(fig, out)
