"""Vector validation and the ground metrics on R^n.

Everything downstream (noise, transport, embeddings) works on plain 1-D
float64 numpy arrays; this module owns the checks and the two ground
metrics. The privacy mechanism is calibrated for the Euclidean metric;
Manhattan is kept because it dominates Euclidean pointwise, which lets
the test suite exercise the metric-dominance direction of the transport
distance.
"""

from __future__ import annotations

import enum

import numpy as np


class MetricKind(enum.Enum):
    EUCLIDEAN = "euclidean"
    MANHATTAN = "manhattan"


def as_vector(x) -> np.ndarray:
    """Coerce to a finite 1-D float64 array of dimension >= 1."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector components must be finite")
    return v


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")


def euclidean(a, b) -> float:
    a, b = as_vector(a), as_vector(b)
    _check_same_dim(a, b)
    return float(np.linalg.norm(a - b))


def manhattan(a, b) -> float:
    a, b = as_vector(a), as_vector(b)
    _check_same_dim(a, b)
    return float(np.abs(a - b).sum())


_METRIC_FNS = {MetricKind.EUCLIDEAN: euclidean, MetricKind.MANHATTAN: manhattan}


def distance(a, b, metric: MetricKind = MetricKind.EUCLIDEAN) -> float:
    return _METRIC_FNS[metric](a, b)


def pairwise_distances(
    rows_a: np.ndarray, rows_b: np.ndarray, metric: MetricKind = MetricKind.EUCLIDEAN
) -> np.ndarray:
    """Dense k x l matrix of ground distances between two stacks of vectors."""
    a = np.asarray(rows_a, dtype=np.float64)
    b = np.asarray(rows_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("expected 2-D arrays with a shared vector dimension")
    diff = a[:, None, :] - b[None, :, :]
    if metric is MetricKind.EUCLIDEAN:
        return np.sqrt((diff * diff).sum(axis=2))
    return np.abs(diff).sum(axis=2)
