"""Binary classification evaluation: confusion counts, per-class reports,
ROC curves with trapezoidal AUC, and policy-driven threshold selection.

Scores are raw decision values; prediction is +1 iff score >= threshold
(ties predicted positive). Precision or recall cells with a zero denominator
report 0 and set the zero_division flag.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InfeasiblePolicyError, SingleClassError

THRESHOLD_POLICIES = ("recall_first", "precision_first", "youden")


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    """Per-class and aggregate metrics in the usual report layout."""

    negative: ClassMetrics
    positive: ClassMetrics
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    total_support: int
    zero_division: bool = False


@dataclass(frozen=True)
class RocCurve:
    """Threshold sweep: (threshold, FPR, TPR) points ordered by decreasing
    threshold, from (+inf -> (0,0)) to (-inf -> (1,1)), plus trapezoidal AUC."""

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def confusion_at(scores, labels, threshold: float) -> tuple[int, int, int, int]:
    """(TP, FP, TN, FN) when predicting +1 iff score >= threshold."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.size == 0:
        raise ValueError("cannot tally an empty score list")
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    predicted_pos = scores >= threshold
    actual_pos = labels > 0
    tp = int(np.sum(predicted_pos & actual_pos))
    fp = int(np.sum(predicted_pos & ~actual_pos))
    tn = int(np.sum(~predicted_pos & ~actual_pos))
    fn = int(np.sum(~predicted_pos & actual_pos))
    return tp, fp, tn, fn


def _safe_div(num: float, den: float) -> tuple[float, bool]:
    if den == 0:
        return 0.0, True
    return num / den, False


def report_from_confusion(tp: int, fp: int, tn: int, fn: int) -> ClassificationReport:
    """Build the full report from raw confusion counts."""
    total = tp + fp + tn + fn
    if total == 0:
        raise ValueError("empty confusion")
    zero_div = False

    pos_precision, z1 = _safe_div(tp, tp + fp)
    pos_recall, z2 = _safe_div(tp, tp + fn)
    pos_f1, z3 = _safe_div(2 * pos_precision * pos_recall, pos_precision + pos_recall)
    neg_precision, z4 = _safe_div(tn, tn + fn)
    neg_recall, z5 = _safe_div(tn, tn + fp)
    neg_f1, z6 = _safe_div(2 * neg_precision * neg_recall, neg_precision + neg_recall)
    zero_div = any((z1, z2, z3, z4, z5, z6))

    pos_support = tp + fn
    neg_support = tn + fp
    accuracy = (tp + tn) / total

    def weighted(neg_val, pos_val):
        return (neg_support * neg_val + pos_support * pos_val) / total

    return ClassificationReport(
        negative=ClassMetrics(neg_precision, neg_recall, neg_f1, neg_support),
        positive=ClassMetrics(pos_precision, pos_recall, pos_f1, pos_support),
        accuracy=accuracy,
        macro_precision=(neg_precision + pos_precision) / 2,
        macro_recall=(neg_recall + pos_recall) / 2,
        macro_f1=(neg_f1 + pos_f1) / 2,
        weighted_precision=weighted(neg_precision, pos_precision),
        weighted_recall=weighted(neg_recall, pos_recall),
        weighted_f1=weighted(neg_f1, pos_f1),
        total_support=total,
        zero_division=zero_div,
    )


def classification_report(scores, labels, threshold: float) -> ClassificationReport:
    tp, fp, tn, fn = confusion_at(scores, labels, threshold)
    return report_from_confusion(tp, fp, tn, fn)


def roc_curve(scores, labels) -> RocCurve:
    """Sweep thresholds over the unique score values plus infinity sentinels.

    Tied scores flip together, so the curve walks tie blocks diagonally and
    the trapezoidal AUC equals the Mann-Whitney statistic with half credit
    for ties.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels > 0))
    n_neg = int(np.sum(labels <= 0))
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("ROC needs both classes; AUC undefined otherwise")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = (labels[order] > 0).astype(float)

    # cumulative counts after each tie block
    thresholds = [np.inf]
    tp_counts = [0.0]
    fp_counts = [0.0]
    i = 0
    n = scores.size
    tp = fp = 0.0
    while i < n:
        j = i
        while j < n and sorted_scores[j] == sorted_scores[i]:
            j += 1
        block_pos = float(np.sum(sorted_pos[i:j]))
        tp += block_pos
        fp += (j - i) - block_pos
        thresholds.append(sorted_scores[i])
        tp_counts.append(tp)
        fp_counts.append(fp)
        i = j
    thresholds.append(-np.inf)
    tp_counts.append(float(n_pos))
    fp_counts.append(float(n_neg))

    tpr = np.asarray(tp_counts) / n_pos
    fpr = np.asarray(fp_counts) / n_neg
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(np.asarray(thresholds), fpr, tpr, auc)


def _operating_points(curve: RocCurve, n_pos: int, n_neg: int):
    """Per-threshold (threshold, precision, recall, tpr, fpr) tuples."""
    points = []
    for threshold, fpr, tpr in zip(curve.thresholds, curve.fpr, curve.tpr):
        tp = tpr * n_pos
        fp = fpr * n_neg
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        points.append((float(threshold), float(precision), float(tpr), float(fpr)))
    return points


def select_threshold(
    curve: RocCurve,
    scores,
    labels,
    policy: str,
    floor: float | None = None,
) -> float:
    """Pick an operating threshold from the ROC sweep.

    recall_first(floor): among thresholds with recall >= floor, maximize
    precision. precision_first(floor): among thresholds with precision >=
    floor, maximize recall. youden: maximize TPR - FPR. Ties always break
    toward the higher threshold. An unattainable floor raises
    InfeasiblePolicyError listing the attainable frontier.
    """
    if policy not in THRESHOLD_POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected {THRESHOLD_POLICIES}")
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels > 0))
    n_neg = int(np.sum(labels <= 0))
    points = _operating_points(curve, n_pos, n_neg)

    if policy == "youden":
        best = max(points, key=lambda p: (p[2] - p[3], p[0]))
        return best[0]

    if floor is None:
        raise ValueError(f"policy {policy} needs a floor value")
    if policy == "recall_first":
        feasible = [p for p in points if p[2] >= floor]
        objective = lambda p: (p[1], p[0])  # precision, then higher threshold
    else:
        feasible = [p for p in points if p[1] >= floor]
        objective = lambda p: (p[2], p[0])  # recall, then higher threshold
    if not feasible:
        frontier = [(p[0], p[1], p[2]) for p in points]
        raise InfeasiblePolicyError(
            f"no threshold attains {policy} floor {floor}; "
            f"attainable (threshold, precision, recall) frontier: {frontier}",
            frontier,
        )
    return max(feasible, key=objective)[0]


def normalize_scores(scores, fit_scores) -> np.ndarray:
    """Min-max map to [0, 1] using the fit split's range, clipped.

    Used to place SVM decision values on the conventional 0.5-threshold
    scale; a degenerate fit range maps everything to 0.5.
    """
    scores = np.asarray(scores, dtype=float)
    fit_scores = np.asarray(fit_scores, dtype=float)
    lo, hi = float(fit_scores.min()), float(fit_scores.max())
    if hi <= lo:
        return np.full_like(scores, 0.5)
    return np.clip((scores - lo) / (hi - lo), 0.0, 1.0)


def roc_to_csv(curve: RocCurve, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "fpr", "tpr"])
        for threshold, fpr, tpr in zip(curve.thresholds, curve.fpr, curve.tpr):
            writer.writerow([f"{threshold:.17g}", f"{fpr:.17g}", f"{tpr:.17g}"])


def render_report(report: ClassificationReport, positive_label: str = "+1",
                  negative_label: str = "-1") -> str:
    """Aligned text table in the standard classification-report layout."""
    header = f"{'':>14}{'precision':>11}{'recall':>10}{'f1-score':>10}{'support':>10}"
    lines = [header, ""]

    def row(name, m: ClassMetrics):
        return (f"{name:>14}{m.precision:>11.4f}{m.recall:>10.4f}"
                f"{m.f1:>10.4f}{m.support:>10d}")

    lines.append(row(negative_label, report.negative))
    lines.append(row(positive_label, report.positive))
    lines.append("")
    lines.append(f"{'accuracy':>14}{'':>21}{report.accuracy:>10.4f}{report.total_support:>10d}")
    lines.append(
        f"{'macro avg':>14}{report.macro_precision:>11.4f}{report.macro_recall:>10.4f}"
        f"{report.macro_f1:>10.4f}{report.total_support:>10d}"
    )
    lines.append(
        f"{'weighted avg':>14}{report.weighted_precision:>11.4f}{report.weighted_recall:>10.4f}"
        f"{report.weighted_f1:>10.4f}{report.total_support:>10d}"
    )
    return "\n".join(lines) + "\n"


def report_to_dict(report: ClassificationReport) -> dict:
    """Flat key-value form of the report for machine-readable output."""
    return {
        "accuracy": report.accuracy,
        "negative.precision": report.negative.precision,
        "negative.recall": report.negative.recall,
        "negative.f1": report.negative.f1,
        "negative.support": report.negative.support,
        "positive.precision": report.positive.precision,
        "positive.recall": report.positive.recall,
        "positive.f1": report.positive.f1,
        "positive.support": report.positive.support,
        "macro.precision": report.macro_precision,
        "macro.recall": report.macro_recall,
        "macro.f1": report.macro_f1,
        "weighted.precision": report.weighted_precision,
        "weighted.recall": report.weighted_recall,
        "weighted.f1": report.weighted_f1,
        "total_support": report.total_support,
        "zero_division": report.zero_division,
    }
