"""Distance metrics shared by the prototype layer, clustering and losses.

Supported metrics: ``euclidean`` (L2 norm of the difference), ``cosine``
(1 - cosine similarity; requires nonzero norms) and ``sqeuclidean``
(squared L2, kept as an experimentation switch).
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError

METRICS = ("euclidean", "cosine", "sqeuclidean")

# Guard for the euclidean derivative at coincident points.
NORM_EPS = 1e-12


def _check_metric(metric: str) -> None:
    if metric not in METRICS:
        raise NumericError(f"unknown metric {metric!r}, expected one of {METRICS}")


def distance(a: np.ndarray, b: np.ndarray, metric: str = "euclidean") -> float:
    """Scalar distance between two vectors."""
    _check_metric(metric)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if metric == "euclidean":
        return float(np.linalg.norm(a - b))
    if metric == "sqeuclidean":
        diff = a - b
        return float(diff @ diff)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise NumericError("cosine distance undefined for zero-norm vector")
    return float(1.0 - (a @ b) / (na * nb))


def pairwise_distances(A: np.ndarray, B: np.ndarray, metric: str = "euclidean") -> np.ndarray:
    """All-pairs distances between rows of A (m x j) and B (n x j)."""
    _check_metric(metric)
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if metric in ("euclidean", "sqeuclidean"):
        sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * (A @ B.T)
        np.clip(sq, 0.0, None, out=sq)
        return sq if metric == "sqeuclidean" else np.sqrt(sq)
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    if np.any(na == 0.0) or np.any(nb == 0.0):
        raise NumericError("cosine distance undefined for zero-norm vector")
    return 1.0 - (A @ B.T) / np.outer(na, nb)


def distance_grad(a: np.ndarray, b: np.ndarray, metric: str = "euclidean"):
    """Gradients of distance(a, b) with respect to a and b."""
    _check_metric(metric)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if metric == "euclidean":
        diff = a - b
        d = np.linalg.norm(diff)
        unit = diff / max(d, NORM_EPS)
        return unit, -unit
    if metric == "sqeuclidean":
        diff = 2.0 * (a - b)
        return diff, -diff
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise NumericError("cosine distance undefined for zero-norm vector")
    cos = (a @ b) / (na * nb)
    da = -b / (na * nb) + cos * a / (na * na)
    db = -a / (na * nb) + cos * b / (nb * nb)
    return da, db
