"""Matplotlib renderings written next to the CSV reports.

All figures go straight to files through the Agg backend; nothing here
opens a window.
"""

from __future__ import annotations

import colorsys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .palette import BIN_NAMES

__all__ = [
    "plot_loss_trajectory",
    "plot_confusion_matrix",
    "plot_group_ratings",
    "plot_palette_aggregates",
]


def plot_loss_trajectory(trajectory, path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5), constrained_layout=True)
    ax.plot(np.arange(len(trajectory)), trajectory, lw=1.5)
    ax.set_xlabel("step")
    ax.set_ylabel("similarity loss")
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(True, alpha=0.3)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_confusion_matrix(cm, path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 4), constrained_layout=True)
    im = ax.imshow(cm.percentages, cmap="Blues", vmin=0, vmax=100)
    ax.set_xticks(range(len(cm.col_labels)), [c.capitalize() for c in cm.col_labels], rotation=30)
    ax.set_yticks(range(len(cm.row_labels)), [r.capitalize() for r in cm.row_labels])
    ax.set_xlabel("labelled affect")
    ax.set_ylabel("intended affect")
    for i in range(cm.percentages.shape[0]):
        for j in range(cm.percentages.shape[1]):
            v = cm.percentages[i, j]
            ax.text(
                j, i, f"{v:.0f}%", ha="center", va="center",
                color="white" if v > 50 else "black", fontsize=9,
            )
    fig.colorbar(im, ax=ax, label="% of responses")
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_group_ratings(summaries, path, label: str) -> None:
    """Quality and novelty means with 95% CI error bars, one bar per group."""
    groups = [s.group for s in summaries]
    x = np.arange(len(groups))
    fig, axes = plt.subplots(1, 2, figsize=(max(7, 1.4 * len(groups)), 3.5), constrained_layout=True)
    for ax, metric in zip(axes, ("quality", "novelty")):
        means = [getattr(s, f"{metric}_mean") for s in summaries]
        cis = [getattr(s, f"{metric}_ci") for s in summaries]
        ax.bar(x, means, yerr=cis, capsize=3, color="#6699cc", edgecolor="#333333")
        ax.set_xticks(x, groups, rotation=30, ha="right")
        ax.set_ylim(0, 5)
        ax.set_ylabel(f"mean {metric} (1-5)")
        ax.set_title(f"{metric} by {label}", fontsize=10)
        ax.grid(True, axis="y", alpha=0.3)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _bin_colors():
    colors = [colorsys.hsv_to_rgb(i * 30 / 360.0, 0.85, 0.92) for i in range(12)]
    return colors + [(1.0, 1.0, 1.0), (0.05, 0.05, 0.05), (0.55, 0.55, 0.55)]


def plot_palette_aggregates(aggregates, path, label: str) -> None:
    """Stacked bar of the 15-bin composition per group, bins shown in
    their own colors."""
    groups = [a.group for a in aggregates]
    x = np.arange(len(groups))
    colors = _bin_colors()
    fig, ax = plt.subplots(figsize=(max(7, 1.4 * len(groups)), 4.2), constrained_layout=True)
    bottom = np.zeros(len(groups))
    for b in range(15):
        vals = np.array([a.mean_ratios[b] for a in aggregates])
        ax.bar(
            x, vals, bottom=bottom, color=colors[b], edgecolor="#888888",
            linewidth=0.3, label=BIN_NAMES[b],
        )
        bottom += vals
    ax.set_xticks(x, groups, rotation=30, ha="right")
    ax.set_ylim(0, 1)
    ax.set_ylabel("pixel ratio")
    ax.set_title(f"palette composition by {label}", fontsize=10)
    ax.legend(ncols=3, fontsize=7, loc="upper right", framealpha=0.9)
    fig.savefig(path, dpi=150)
    plt.close(fig)
