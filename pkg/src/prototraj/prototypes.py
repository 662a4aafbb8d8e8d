"""Prototype layer: proximity kernel, sparsity transformation, gradients.

The layer maps T sentence embeddings against K trainable prototypes into a
T x K proximity matrix ``dense`` with entries exp(-d/psi^2) in (0, 1]. A
row-wise temperature softmax then produces selection weights, and the
sparse output row is the elementwise product of the weights with the dense
row: at large gamma exactly the argmax entry survives with its dense
value, so each row has the topology of a one-hot vector while staying
differentiable.

The backward pass is the exact chain rule through the softmax selection,
the exp kernel and the distance, with the euclidean derivative guarded at
coincident points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError
from .metrics import METRICS, NORM_EPS, distance

__all__ = [
    "PrototypeSet",
    "SimilarityConfig",
    "SimilarityMatrix",
    "LayerCache",
    "distance",
    "similarity",
    "similarity_matrix",
    "sparsify",
    "layer_forward",
    "layer_backward",
]


@dataclass
class SimilarityConfig:
    """Kernel and sparsification settings for the prototype layer."""

    metric: str = "euclidean"
    psi: float = 1.0
    gamma: float = 1e6
    sparse: bool = True

    def __post_init__(self):
        if self.metric not in METRICS:
            raise NumericError(f"unknown metric {self.metric!r}")
        if not self.psi > 0:
            raise NumericError(f"psi must be positive, got {self.psi}")
        if not self.gamma >= 1:
            raise NumericError(f"gamma must be >= 1, got {self.gamma}")


@dataclass
class PrototypeSet:
    """K trainable prototype vectors, plus text and sentiment after projection."""

    vectors: np.ndarray
    texts: list[str] | None = None
    sentiment_scores: np.ndarray | None = None

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 2:
            raise NumericError("prototype set needs a K x J matrix with K >= 2")
        if not np.all(np.isfinite(self.vectors)):
            raise NumericError("prototype vectors must be finite")
        if self.texts is not None and len(self.texts) != self.vectors.shape[0]:
            raise NumericError("prototype texts length mismatch")

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass
class SimilarityMatrix:
    dense: np.ndarray
    sparse: np.ndarray
    argmax_indices: np.ndarray


def similarity(e: np.ndarray, p: np.ndarray, cfg: SimilarityConfig) -> float:
    """Proximity exp(-d(e, p) / psi^2); equals 1 iff the distance is 0."""
    return float(np.exp(-distance(e, p, cfg.metric) / cfg.psi**2))


def _distances_and_diff(E: np.ndarray, P: np.ndarray, metric: str):
    """T x K distances plus the cached geometry needed for the backward pass.

    Euclidean variants keep the T x K x J difference tensor; cosine keeps
    norms and dot products.
    """
    if metric in ("euclidean", "sqeuclidean"):
        diff = E[:, None, :] - P[None, :, :]
        sq = np.einsum("tkj,tkj->tk", diff, diff)
        dists = sq if metric == "sqeuclidean" else np.sqrt(sq)
        return dists, {"diff": diff}
    norm_e = np.linalg.norm(E, axis=1)
    norm_p = np.linalg.norm(P, axis=1)
    if np.any(norm_e == 0.0) or np.any(norm_p == 0.0):
        raise NumericError("cosine distance undefined for zero-norm vector")
    dots = E @ P.T
    dists = 1.0 - dots / np.outer(norm_e, norm_p)
    return dists, {"norm_e": norm_e, "norm_p": norm_p, "dots": dots}


def _selection_weights(dense: np.ndarray, gamma: float) -> np.ndarray:
    """Row-wise softmax of gamma * dense with max subtraction."""
    z = gamma * dense
    z -= z.max(axis=1, keepdims=True)
    w = np.exp(z)
    w /= w.sum(axis=1, keepdims=True)
    return w


def sparsify(dense: np.ndarray, gamma: float) -> np.ndarray:
    """Apply the selection softmax to each row: sparse = softmax(gamma*row) * row.

    For gamma around 1e6 each row is numerically one-hot, keeping the
    argmax entry at its dense value. The row argmax position is never
    changed for any gamma >= 1.
    """
    if not gamma >= 1:
        raise NumericError(f"gamma must be >= 1, got {gamma}")
    dense = np.asarray(dense, dtype=np.float64)
    return _selection_weights(dense, gamma) * dense


def similarity_matrix(E: np.ndarray, P: np.ndarray, cfg: SimilarityConfig) -> SimilarityMatrix:
    """Dense proximities, sparse rows and per-row argmax (lowest-index ties)."""
    E = np.asarray(E, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    if E.shape[1] != P.shape[1]:
        raise NumericError(f"embedding dim {E.shape[1]} != prototype dim {P.shape[1]}")
    dists, _ = _distances_and_diff(E, P, cfg.metric)
    dense = np.exp(-dists / cfg.psi**2)
    argmax = np.argmax(dense, axis=1)
    sparse = sparsify(dense, cfg.gamma) if cfg.sparse else dense.copy()
    return SimilarityMatrix(dense=dense, sparse=sparse, argmax_indices=argmax)


@dataclass
class LayerCache:
    """Forward values kept for the exact backward pass."""

    E: np.ndarray
    P: np.ndarray
    cfg: SimilarityConfig
    dists: np.ndarray
    dense: np.ndarray
    weights: np.ndarray | None
    output: np.ndarray
    argmax: np.ndarray
    geom: dict = field(repr=False, default_factory=dict)


def layer_forward(E: np.ndarray, P: np.ndarray, cfg: SimilarityConfig) -> LayerCache:
    E = np.asarray(E, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    if E.shape[1] != P.shape[1]:
        raise NumericError(f"embedding dim {E.shape[1]} != prototype dim {P.shape[1]}")
    dists, geom = _distances_and_diff(E, P, cfg.metric)
    dense = np.exp(-dists / cfg.psi**2)
    argmax = np.argmax(dense, axis=1)
    if cfg.sparse:
        weights = _selection_weights(dense, cfg.gamma)
        output = weights * dense
    else:
        weights = None
        output = dense
    return LayerCache(E, P, cfg, dists, dense, weights, output, argmax, geom)


def layer_backward(cache: LayerCache, upstream: np.ndarray):
    """Gradients of a scalar loss on the layer output w.r.t. E and P.

    ``upstream`` is dLoss/dOutput with the forward output's shape. Returns
    (dE, dP).
    """
    cfg = cache.cfg
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != cache.output.shape:
        raise NumericError("upstream gradient shape mismatch")

    if cfg.sparse:
        w = cache.weights
        # Product rule: output = w * dense.
        g_dense = upstream * w
        g_w = upstream * cache.dense
        # Softmax backward, then the chain into dense via z = gamma * dense.
        dot = np.sum(g_w * w, axis=1, keepdims=True)
        g_dense = g_dense + cfg.gamma * w * (g_w - dot)
    else:
        g_dense = upstream

    # dense = exp(-d / psi^2)
    g_dist = g_dense * cache.dense * (-1.0 / cfg.psi**2)

    metric = cfg.metric
    if metric in ("euclidean", "sqeuclidean"):
        diff = cache.geom["diff"]
        if metric == "euclidean":
            denom = np.maximum(cache.dists, NORM_EPS)[:, :, None]
            scaled = (g_dist[:, :, None] / denom) * diff
        else:
            scaled = 2.0 * g_dist[:, :, None] * diff
        dE = scaled.sum(axis=1)
        dP = -scaled.sum(axis=0)
        return dE, dP

    norm_e = cache.geom["norm_e"]
    norm_p = cache.geom["norm_p"]
    dots = cache.geom["dots"]
    inv_cross = 1.0 / np.outer(norm_e, norm_p)
    cos = dots * inv_cross
    # d = 1 - cos(e, p):
    #   dd/de = -p/(|e||p|) + cos * e/|e|^2,  dd/dp symmetric.
    coeff = g_dist * inv_cross
    dE = -(coeff @ cache.P) + ((g_dist * cos).sum(axis=1) / norm_e**2)[:, None] * cache.E
    dP = -(coeff.T @ cache.E) + ((g_dist * cos).sum(axis=0) / norm_p**2)[:, None] * cache.P
    return dE, dP
