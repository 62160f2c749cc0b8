"""Forecast accuracy and clustering agreement metrics."""

from __future__ import annotations

import numpy as np

MAPE_GUARD = 1e-9


def mape(predicted: np.ndarray, truth: np.ndarray) -> float | None:
    """Mean |error| / |truth| over entries with |truth| above the guard.

    Returns None when nothing survives the guard.
    """
    predicted = np.asarray(predicted, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    keep = np.abs(truth) > MAPE_GUARD
    if not keep.any():
        return None
    return float(np.mean(np.abs(predicted[keep] - truth[keep]) / np.abs(truth[keep])))


def rmse(predicted: np.ndarray, truth: np.ndarray) -> float:
    predicted = np.asarray(predicted, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    return float(np.sqrt(np.mean((predicted - truth) ** 2)))


def f1_binary(predicted: np.ndarray, truth: np.ndarray) -> float:
    """F1 with True as the positive class.

    No positives in the truth: 1.0 when none are predicted, else 0.0.
    """
    predicted = np.asarray(predicted, dtype=bool).ravel()
    truth = np.asarray(truth, dtype=bool).ravel()
    if predicted.shape != truth.shape:
        raise ValueError("aligned binary sequences required")
    tp = float((predicted & truth).sum())
    fp = float((predicted & ~truth).sum())
    fn = float((~predicted & truth).sum())
    if not truth.any():
        return 1.0 if not predicted.any() else 0.0
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def adjusted_rand_index(labels_a: np.ndarray, labels_b: np.ndarray) -> float:
    """Chance-corrected agreement of two labelings of the same items."""
    labels_a = np.asarray(labels_a).ravel()
    labels_b = np.asarray(labels_b).ravel()
    if labels_a.shape != labels_b.shape:
        raise ValueError("labelings must align")
    n = len(labels_a)
    if n == 0:
        return 1.0
    _, a_idx = np.unique(labels_a, return_inverse=True)
    _, b_idx = np.unique(labels_b, return_inverse=True)
    contingency = np.zeros((a_idx.max() + 1, b_idx.max() + 1))
    np.add.at(contingency, (a_idx, b_idx), 1.0)

    def comb2(x):
        return x * (x - 1.0) / 2.0

    sum_cells = comb2(contingency).sum()
    sum_rows = comb2(contingency.sum(axis=1)).sum()
    sum_cols = comb2(contingency.sum(axis=0)).sum()
    total = comb2(float(n))
    expected = sum_rows * sum_cols / total if total > 0 else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))
