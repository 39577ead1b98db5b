"""Figure rendering for the report path: ROC curves, training traces, and
model comparison bars, written next to the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import RocCurve
from .variational import TrainTrace

FIG_DPI = 130


def save_roc_plot(curve: RocCurve, path: str, title: str = "ROC curve",
                  operating_points: dict[str, tuple[float, float]] | None = None) -> None:
    """ROC with the no-skill diagonal; operating_points maps a label to a
    highlighted (fpr, tpr) marker."""
    fig, ax = plt.subplots(figsize=(5.2, 5.0))
    ax.plot([0, 1], [0, 1], "k--", lw=1, label="no skill")
    ax.plot(curve.fpr, curve.tpr, lw=2, label=f"AUC = {curve.auc:.3f}")
    if operating_points:
        for label, (fpr, tpr) in sorted(operating_points.items()):
            ax.plot([fpr], [tpr], "o", ms=7, label=label)
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.set_title(title)
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)


def save_trace_plot(trace: TrainTrace, path: str, title: str = "training trace") -> None:
    """Loss and gradient norm against the outer iteration."""
    iterations = np.arange(len(trace.losses))
    fig, (ax_loss, ax_grad) = plt.subplots(2, 1, figsize=(6.0, 5.6), sharex=True)
    ax_loss.plot(iterations, trace.losses, lw=1.5)
    ax_loss.set_ylabel("loss")
    ax_loss.set_title(title)
    ax_loss.grid(alpha=0.3)
    ax_grad.plot(iterations, trace.grad_norms, lw=1.5, color="tab:orange")
    ax_grad.set_ylabel("gradient norm")
    ax_grad.set_xlabel("iteration")
    ax_grad.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)


def save_comparison_plot(metrics_by_model: dict[str, dict[str, float]], path: str,
                         title: str = "model comparison") -> None:
    """Grouped bars of accuracy/precision/recall/F1 across models."""
    metric_names = ["accuracy", "precision", "recall", "f1"]
    models = list(metrics_by_model.keys())
    if not models:
        raise ValueError("nothing to plot")
    x = np.arange(len(metric_names))
    width = 0.8 / len(models)
    fig, ax = plt.subplots(figsize=(7.2, 4.4))
    for k, model in enumerate(models):
        values = [metrics_by_model[model].get(m, 0.0) for m in metric_names]
        ax.bar(x + k * width, values, width, label=model)
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels([m.capitalize() for m in metric_names])
    ax.set_ylim(0, 1.0)
    ax.set_ylabel("value")
    ax.set_title(title)
    ax.grid(axis="y", alpha=0.3)
    ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)
