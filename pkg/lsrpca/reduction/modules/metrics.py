"""
Classification metrics used by the comparison harness.
"""

import numpy as np

from .exceptions import PreconditionError
from .exceptions import ShapeError

PROBABILITY_CLIP = 1e-15


def _check_labels(labels: np.ndarray, rows: int, n_classes: int | None = None) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != rows:
        raise ShapeError("Need one label per row", labels.shape, (rows,))
    if labels.size and (labels.min() < 0 or (n_classes is not None and labels.max() >= n_classes)):
        raise ShapeError(f"Labels must lie in [0, {n_classes})", labels.shape)
    return labels.astype(np.int64, copy=False)


def multiclass_log_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    """
    Mean negative log-probability of the true class, -(1/N)·Σ log p[i, y_i].

    Probabilities are clipped to [1e-15, 1 - 1e-15] before the log.

    Raises:
        ShapeError: If labels and probabilities disagree in shape or range
        PreconditionError: If a row of ``probs`` does not sum to 1
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise ShapeError("Probabilities must be a non-empty N x C matrix", probs.shape)
    labels = _check_labels(labels, probs.shape[0], probs.shape[1])
    if np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-6):
        raise PreconditionError("Every row of probabilities must sum to 1")
    picked = np.clip(probs[np.arange(probs.shape[0]), labels], PROBABILITY_CLIP, 1.0 - PROBABILITY_CLIP)
    return float(-np.mean(np.log(picked)))


def error_rate(predicted: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of rows whose predicted class differs from the label."""
    predicted = np.asarray(predicted)
    labels = _check_labels(labels, predicted.shape[0])
    if predicted.shape[0] == 0:
        raise ShapeError("Cannot score an empty prediction", predicted.shape)
    return float(np.mean(predicted != labels))
