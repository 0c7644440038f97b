"""Classification and retrieval metrics shared across the harness.

Rejections are encoded as label ``-1``; when ground truth marks a sample as
belonging to no known class it also carries ``-1``.  Precision-recall areas
use step-wise summation over descending score thresholds with ties grouped,
so a constant score yields exactly the positive base rate.
"""

from __future__ import annotations

import numpy as np

REJECT = -1


def accuracy(predictions, truths) -> float:
    predictions = np.asarray(predictions)
    truths = np.asarray(truths)
    if predictions.shape != truths.shape:
        raise ValueError("predictions and truths must align")
    if predictions.size == 0:
        raise ValueError("empty input")
    return float(np.mean(predictions == truths))


def unknown_precision_recall(predictions, truths, unknown=REJECT) -> tuple[float | None, float | None]:
    """Treat rejection as the positive prediction for the unknown label.

    Precision is None when nothing was rejected; recall is None when no
    sample is truly unknown.
    """
    predictions = np.asarray(predictions)
    truths = np.asarray(truths)
    rejected = predictions == unknown
    is_unknown = truths == unknown
    tp = int(np.sum(rejected & is_unknown))
    precision = tp / int(rejected.sum()) if rejected.any() else None
    recall = tp / int(is_unknown.sum()) if is_unknown.any() else None
    return precision, recall


def average_precision(targets, scores) -> float | None:
    """Area under the precision-recall curve, ties grouped.

    Thresholds descend over the unique score values; precision at each
    recall increment uses everything scored at or above the threshold.
    Returns None when there are no positive targets.
    """
    targets = np.asarray(targets).astype(bool).ravel()
    scores = np.asarray(scores, dtype=float).ravel()
    if targets.shape != scores.shape:
        raise ValueError("targets and scores must align")
    if targets.size == 0:
        raise ValueError("empty input")
    total_pos = int(targets.sum())
    if total_pos == 0:
        return None
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_targets = targets[order]
    cum_tp = np.cumsum(sorted_targets)
    cum_n = np.arange(1, targets.size + 1)
    # group boundaries: last index of each tied score block
    is_boundary = np.ones(targets.size, dtype=bool)
    is_boundary[:-1] = sorted_scores[:-1] != sorted_scores[1:]
    tp = cum_tp[is_boundary]
    n_at = cum_n[is_boundary]
    recall = tp / total_pos
    precision = tp / n_at
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


def unknown_auprc(truths, rejection_scores, unknown=REJECT) -> float | None:
    truths = np.asarray(truths)
    return average_precision(truths == unknown, rejection_scores)


def compute_metrics(predictions, truths, rejection_scores=None, unknown=REJECT) -> dict:
    """Exact-match accuracy plus unknown-detection precision/recall/AUPRC."""
    predictions = np.asarray(predictions)
    truths = np.asarray(truths)
    out: dict[str, float | None] = {"accuracy": accuracy(predictions, truths)}
    precision, recall = unknown_precision_recall(predictions, truths, unknown)
    out["unknown_precision"] = precision
    out["unknown_recall"] = recall
    known = truths != unknown
    out["known_accuracy"] = (
        float(np.mean(predictions[known] == truths[known])) if known.any() else None
    )
    if rejection_scores is not None and (truths == unknown).any():
        out["unknown_auprc"] = unknown_auprc(truths, rejection_scores, unknown)
    else:
        out["unknown_auprc"] = None
    return out


def aggregate_rows(rows: list[dict], keys: list[str]) -> dict:
    """Mean and sample stddev per key over per-trial rows (None values skipped)."""
    out = {}
    for key in keys:
        values = [row[key] for row in rows if row.get(key) is not None]
        if not values:
            out[f"{key}_mean"] = None
            out[f"{key}_std"] = None
            continue
        arr = np.asarray(values, dtype=float)
        out[f"{key}_mean"] = float(arr.mean())
        out[f"{key}_std"] = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return out
