"""Weighted cross-entropy over the 3-class output."""

from __future__ import annotations

import math

import numpy as np

from .errors import DataError, DimensionError
from .linalg import Matrix

N_CLASSES = 3

# Probabilities below this are clamped before the log; the training loop
# counts clamp events in its diagnostics.
PROB_FLOOR = 1e-300


def cross_entropy(probs: Matrix, label: int, class_weights=None):
    """Loss and its fused gradient for one sample.

    ``probs`` is the (3, 1) softmax output of the network. The returned
    gradient is taken with respect to the pre-softmax scores, folding the
    softmax Jacobian into the cross-entropy derivative: w * (probs - onehot).
    Feed it to the network backward with ``grad_wrt_preactivation=True``.
    """
    if probs.shape != (N_CLASSES, 1):
        raise DimensionError(f"probs must be ({N_CLASSES}, 1), got {probs.shape}")
    if label not in (0, 1, 2):
        raise DataError(f"label must be 0, 1 or 2, got {label!r}")
    w = 1.0 if class_weights is None else float(class_weights[label])
    p = max(float(probs[label, 0]), PROB_FLOOR)
    loss = -w * math.log(p)
    onehot = np.zeros((N_CLASSES, 1))
    onehot[label, 0] = 1.0
    grad_scores = w * (probs - onehot)
    return loss, grad_scores


def inverse_frequency_weights(labels) -> np.ndarray:
    """Per-class weights proportional to 1/frequency, normalized to mean 1.

    Classes absent from ``labels`` are treated as having a single sample so
    the weights stay finite.
    """
    counts = np.bincount(list(labels), minlength=N_CLASSES)[:N_CLASSES]
    counts = np.maximum(counts, 1).astype(np.float64)
    raw = 1.0 / counts
    return raw / raw.mean()


def uniform_weights() -> np.ndarray:
    return np.ones(N_CLASSES)
