"""Batch-means error bars for ensemble averages."""

from __future__ import annotations

import numpy as np

MIN_BATCHES = 30
DEFAULT_BATCHES = 40


def batch_means(values: np.ndarray, batches: int = DEFAULT_BATCHES) -> tuple[float, float]:
    """Mean and batch-means standard error of per-sample ``values``.

    Samples are split into ``batches`` contiguous groups in their given order, so
    the result depends only on the ordered values.
    """
    v = np.asarray(values, dtype=float)
    if batches < MIN_BATCHES:
        raise ValueError(f"need at least {MIN_BATCHES} batches, got {batches}")
    if len(v) < batches:
        raise ValueError(f"{len(v)} samples cannot fill {batches} batches")
    groups = np.array_split(v, batches)
    means = np.array([g.mean() for g in groups])
    weights = np.array([len(g) for g in groups], dtype=float)
    mean = float(np.dot(means, weights) / weights.sum())
    stderr = float(np.std(means, ddof=1) / np.sqrt(batches))
    return mean, stderr


def within_sigma(estimate: float, reference: float, stderr: float, k: float = 3.0) -> bool:
    return abs(estimate - reference) <= k * stderr


def positive_at(estimate: float, stderr: float, k: float = 3.0) -> bool:
    return estimate > k * stderr
