"""Figures written next to the tab-separated training log and eval report."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluator import EvalReport  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "pronres",
}

# PNG metadata would otherwise embed the matplotlib version string
_METADATA = {"Software": None}


def _save(fig, path):
    fig.savefig(path, dpi=120, bbox_inches="tight", metadata=_METADATA)
    plt.close(fig)


def plot_training_curve(records, path) -> None:
    """Training loss (left axis) and dev P/R/F1 (right axis) per epoch."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.0))
        epochs = [r.epoch for r in records]
        ax.plot(epochs, [r.train_loss for r in records], color="0.2", lw=1.2, label="train loss")
        ax.set_xlabel("epoch")
        ax.set_ylabel("train loss")
        right = ax.twinx()
        right.spines["right"].set_visible(True)
        for attr, color in (("precision", "tab:blue"), ("recall", "tab:orange"), ("f1", "tab:green")):
            right.plot(epochs, [getattr(r.dev, attr) for r in records], color=color, lw=1.0, label=f"dev {attr}")
        right.set_ylim(0, 105)
        right.set_ylabel("dev score (%)")
        handles = ax.get_legend_handles_labels()[0] + right.get_legend_handles_labels()[0]
        ax.legend(handles, [h.get_label() for h in handles], loc="center right", frameon=False)
        _save(fig, path)


def plot_report(rows: Sequence[tuple[str, EvalReport]], path) -> None:
    """Grouped precision/recall/F1 bars, one group per report row."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(3.0, 1.2 * len(rows) + 1.5), 3.0))
        x = np.arange(len(rows))
        for k, attr in enumerate(("precision", "recall", "f1")):
            values = [getattr(r, attr) for _, r in rows]
            bars = ax.bar(x + (k - 1) * 0.25, values, width=0.25, label=attr)
            ax.bar_label(bars, fmt="%.2f", fontsize=6, padding=1)
        ax.set_xticks(x, [name for name, _ in rows])
        ax.set_ylim(0, 108)
        ax.set_ylabel("score (%)")
        ax.legend(frameon=False, ncol=3, loc="lower center", bbox_to_anchor=(0.5, 1.0))
        _save(fig, path)
