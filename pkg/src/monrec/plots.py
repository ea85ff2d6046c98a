"""Figures for evaluation reports."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_selection(grid: Sequence[dict], path: str | Path) -> Path:
    """Accuracy and F1 per selection variant."""
    rows = {r["variant"]: r["select"] for r in grid}
    names = list(rows)
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.bar(x - 0.2, [rows[n]["accuracy"] for n in names], 0.4, label="accuracy")
    ax.bar(x + 0.2, [rows[n]["f1"] for n in names], 0.4, label="F1")
    ax.set_xticks(x, names)
    ax.set_ylim(0, 1)
    ax.set_title("Metric selection (test split)")
    ax.legend(loc="lower right")
    return _save(fig, Path(path))


def plot_grid(grid: Sequence[dict], path: str | Path,
              metrics: Sequence[str] = ("dims_jaccard", "expression_accuracy", "alert_aggregate")) -> Path:
    """One panel per metric, bars per (variant, dimension source, expression source)."""
    labels = [f"{r['variant']}\nD:{r['dimensions'][0]} E:{r['expressions'][0]}" for r in grid]
    fig, axes = plt.subplots(len(metrics), 1, figsize=(max(6, 0.7 * len(grid)), 2.6 * len(metrics)),
                             squeeze=False)
    for ax, m in zip(axes[:, 0], metrics):
        ax.bar(np.arange(len(grid)), [r[m] for r in grid], color="tab:blue")
        ax.set_ylabel(m.replace("_", " "))
        ax.set_ylim(0, 1)
        ax.set_xticks(np.arange(len(grid)), labels, fontsize=7)
    axes[0, 0].set_title("Ablation grid on held-out accounts (D/E: r=ranker, t=text match)")
    return _save(fig, Path(path))


def plot_training(histories: dict[str, list[dict]], path: str | Path, key: str = "val_mrr") -> Path:
    """Validation curve per trained task."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name, hist in histories.items():
        if hist and key in hist[0]:
            ax.plot([h["epoch"] for h in hist], [h[key] for h in hist], label=name)
    ax.set_xlabel("epoch")
    ax.set_ylabel(key.replace("_", " "))
    ax.set_title("Validation during training")
    ax.legend(loc="lower right")
    return _save(fig, Path(path))


def plot_ablation(results: dict[str, Sequence[float]], path: str | Path, random: float | None = None) -> Path:
    """Mean and per-seed validation MRR per ranker variant."""
    names = list(results)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    means = [float(np.mean(results[n])) for n in names]
    ax.bar(np.arange(len(names)), means, color="tab:gray")
    for i, n in enumerate(names):
        ax.scatter(np.full(len(results[n]), i), results[n], color="black", s=10, zorder=3)
    if random is not None:
        ax.axhline(random, color="tab:red", linestyle="--", label="random")
        ax.legend(loc="lower right")
    ax.set_xticks(np.arange(len(names)), names)
    ax.set_ylabel("validation MRR")
    ax.set_title("Ranker ablation")
    return _save(fig, Path(path))
