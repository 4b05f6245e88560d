"""Figure rendering for the CLI report paths.

Every plot lands next to the delimited output it illustrates.  Rendering
is headless (Agg) so runs work in batch environments.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_BAR_COLORS = {"gaussian": "#999999", "line": "#4878cf", "node2vec": "#ee854a"}


def save_training_figure(history, path) -> None:
    """Loss components and validation AUC across epochs."""
    epochs = [h.epoch for h in history]
    fig, (ax_loss, ax_auc) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax_loss.plot(epochs, [h.loss.prediction for h in history], label="prediction")
    if any(h.loss.relation != 0.0 for h in history):
        ax_loss.plot(epochs, [h.loss.relation for h in history], label="relation")
    ax_loss.plot(epochs, [h.loss.total for h in history], label="total",
                 linestyle="--")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss")
    ax_loss.legend(frameon=False)
    aucs = [(h.epoch, h.val_auc) for h in history if h.val_auc is not None]
    if aucs:
        ax_auc.plot([e for e, _ in aucs], [a for _, a in aucs], color="#2ca02c")
        ax_auc.set_ylabel("validation AUC")
    else:
        ax_auc.text(0.5, 0.5, "no validation set", ha="center", va="center",
                    transform=ax_auc.transAxes)
    ax_auc.set_xlabel("epoch")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_matrix_figure(rows, cols, means, path) -> None:
    """Grouped bars of mean AUC per (cell row, embedding column).

    ``means[(row, col)]`` is a float or None for the not-applicable cell.
    """
    fig, ax = plt.subplots(figsize=(7, 3.6))
    width = 0.8 / len(cols)
    x = np.arange(len(rows))
    for k, col in enumerate(cols):
        vals = [means.get((row, col)) for row in rows]
        heights = [v if v is not None else 0.0 for v in vals]
        bars = ax.bar(x + k * width, heights, width,
                      label=col, color=_BAR_COLORS.get(col))
        for bar, v in zip(bars, vals):
            if v is None:
                bar.set_height(0)
            else:
                ax.annotate(f"{v:.3f}", (bar.get_x() + bar.get_width() / 2, v),
                            ha="center", va="bottom", fontsize=7)
    present = [v for v in means.values() if v is not None]
    if present:
        lo = min(present)
        ax.set_ylim(max(0.0, lo - 0.02), max(present) + 0.02)
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels(rows)
    ax.set_ylabel("test AUC")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_mastery_figure(traces, skills, path) -> None:
    """Mean mastery per skill across the cohort, by step."""
    sums: dict[int, np.ndarray] = {}
    counts: dict[int, np.ndarray] = {}
    max_step = max(rec.step for rec in traces) + 1
    for s in range(skills):
        sums[s] = np.zeros(max_step)
        counts[s] = np.zeros(max_step)
    for rec in traces:
        sums[rec.skill][rec.step] += rec.mastery
        counts[rec.skill][rec.step] += 1
    fig, ax = plt.subplots(figsize=(6, 3.4))
    for s in range(skills):
        with np.errstate(invalid="ignore"):
            mean = np.where(counts[s] > 0, sums[s] / np.maximum(counts[s], 1), np.nan)
        ax.plot(np.arange(max_step), mean, label=f"skill {s}")
    ax.set_xlabel("step")
    ax.set_ylabel("mean mastery")
    ax.set_ylim(0, 1)
    ax.legend(frameon=False, fontsize=8, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
