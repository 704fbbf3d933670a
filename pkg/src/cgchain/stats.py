"""Monte Carlo error bars."""

import numpy as np


def batch_means_ci(series, n_batches: int = 64):
    """Mean and 95% half-width of a correlated series via batch means."""
    a = np.asarray(series, dtype=float)
    L = a.size
    if L < 2 * n_batches:
        n_batches = max(2, L // 2)
    B = L // n_batches
    trimmed = a[: n_batches * B].reshape(n_batches, B)
    bm = trimmed.mean(axis=1)
    mean = float(a.mean())
    se = float(bm.std(ddof=1) / np.sqrt(n_batches))
    return mean, 1.96 * se


def mean_ci(values):
    """Mean and 95% half-width for independent samples."""
    a = np.asarray(values, dtype=float)
    se = float(a.std(ddof=1) / np.sqrt(a.size))
    return float(a.mean()), 1.96 * se
