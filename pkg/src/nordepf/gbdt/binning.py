"""Quantile histogram bins.

Each feature gets an increasing array of upper edges. Bucket ``b`` holds the
values ``edges[b-1] < x <= edges[b]``; the last bucket is open above. A split
at bucket ``k`` therefore sends ``x <= edges[k]`` left, so every bin threshold
has an exact real-valued counterpart.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DataError

MAX_BINS = 256


def feature_edges(values: np.ndarray, bins: int) -> np.ndarray:
    v = np.sort(np.asarray(values, dtype=float))
    uniq = np.unique(v)
    if uniq.size <= 1:
        return np.empty(0)
    if uniq.size <= bins:
        # One bucket per distinct value, cut at midpoints.
        return (uniq[:-1] + uniq[1:]) / 2.0
    n = v.size
    ranks = np.ceil(np.arange(1, bins) * n / bins).astype(np.int64) - 1
    edges = np.unique(v[ranks])
    return edges[edges < uniq[-1]]


def build_bins(X_train, bins: int = 255) -> list[np.ndarray]:
    """Per-feature quantile edges from training rows; at most ``bins`` buckets each."""
    if bins < 2 or bins > MAX_BINS - 1:
        raise ConfigError(f"bins must be in [2, {MAX_BINS - 1}], got {bins}")
    X = np.asarray(X_train, dtype=float)
    if np.isnan(X).any():
        raise DataError("histogram binning does not accept missing values")
    return [feature_edges(X[:, j], bins) for j in range(X.shape[1])]


def apply_bins(X, edges: list[np.ndarray]) -> np.ndarray:
    """Bucket indices as a C-ordered uint8 matrix."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(edges):
        raise DataError(f"expected {len(edges)} feature columns, got shape {X.shape}")
    if np.isnan(X).any():
        raise DataError("histogram binning does not accept missing values")
    out = np.empty(X.shape, dtype=np.uint8)
    for j, e in enumerate(edges):
        out[:, j] = np.searchsorted(e, X[:, j], side="left")
    return out
