"""Static matplotlib figures for benchmark reports (Agg backend, files only)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import bench  # noqa: E402

_RC = {
    "font.size": 10,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def new_figure(width=5.0, ratio=None):
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(width, width * (ratio or golden)))
    return fig, ax


def legend(ax):
    if ax.get_legend_handles_labels()[0]:
        ax.legend(frameon=False)


def save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def length_histogram(runs, path, god_number=26):
    fig, ax = new_figure()
    lengths = [[r["solution_length"] for r in run.records if r["solved"]] for run in runs]
    top = max([max(ls) for ls in lengths if ls] + [1])
    bins = np.arange(0.5, top + 1.5)
    for run, ls in zip(runs, lengths):
        if ls:
            ax.hist(ls, bins=bins, alpha=0.5, label=run.variant)
    if top >= god_number - 5:
        ax.axvline(god_number, color="red", lw=1)
    ax.set_xlabel("solution length (quarter turns)")
    ax.set_ylabel("cubes")
    legend(ax)
    return save(fig, path)


def solve_rate_vs_time(runs, path):
    fig, ax = new_figure()
    for run in runs:
        t, rate = bench.solve_rate_curve(run.records)
        if len(t):
            ax.step(np.concatenate([[0.0], t]), np.concatenate([[0.0], rate]), where="post", label=run.variant)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("fraction solved")
    ax.set_ylim(0, 1.02)
    legend(ax)
    return save(fig, path)


def triplet_distribution(stats: "bench.TripletStats", path, title=None):
    fig, ax = new_figure()
    classes = stats.classes()
    means = stats.class_means("count")
    for (name, members), colour in zip(classes.items(), ("C0", "C1")):
        counts = [stats.counts[t] for t in members]
        if not counts:
            continue
        ax.hist(counts, bins=20, alpha=0.5, color=colour, label=f"{name} ({len(counts)})")
        ax.axvline(means[name], color=colour, lw=1.5)
    ax.set_xlabel("occurrences per triplet")
    ax.set_ylabel("triplets")
    if title:
        ax.set_title(title)
    legend(ax)
    return save(fig, path)


def render_report_figures(runs, triplets: dict, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    files = {
        "length_histogram.png": length_histogram(runs, out / "length_histogram.png"),
        "solve_rate_vs_time.png": solve_rate_vs_time(runs, out / "solve_rate_vs_time.png"),
    }
    for variant, stats in triplets.items():
        if stats.total_triplets:
            name = f"triplets_{variant}.png"
            files[name] = triplet_distribution(stats, out / name, title=variant)
    return files
