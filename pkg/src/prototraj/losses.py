"""Training objectives and their exact gradients.

Four terms: a square accuracy loss on predictions, a sigmoid diversity
penalty on the minimum pairwise prototype distance, a prototypicality term
pulling every sentence toward its nearest prototype, and their weighted
combination. Diversity and prototypicality gradients flow only into the
prototypes; sentence embeddings are frozen inputs.

Subgradients at min ties go to the lowest-index minimizer so gradients are
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backbone as bb
from . import prototypes as pl
from .errors import NumericError
from .metrics import NORM_EPS, distance_grad, pairwise_distances


@dataclass
class LossConfig:
    """Weights and constants of the combined objective."""

    alpha: float = 0.1
    beta: float = 1e-4
    delta: float = 0.5
    eta: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "delta", "eta"):
            if not np.isfinite(getattr(self, name)):
                raise NumericError(f"loss weight {name} must be finite")
        if not self.delta > 0:
            raise NumericError(f"delta must be positive, got {self.delta}")
        if not self.eta > 0:
            raise NumericError(f"eta must be positive, got {self.eta}")


@dataclass
class LossBreakdown:
    acc: float
    div: float
    proto: float
    total: float

    @classmethod
    def combine(cls, acc: float, div: float, proto: float, cfg: LossConfig) -> "LossBreakdown":
        return cls(acc=acc, div=div, proto=proto, total=acc + cfg.alpha * div + cfg.beta * proto)


def accuracy_loss(preds: np.ndarray, labels: np.ndarray) -> float:
    """Mean over the batch of the squared error norm."""
    preds = np.asarray(preds, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if preds.shape != labels.shape:
        raise NumericError(f"prediction shape {preds.shape} != label shape {labels.shape}")
    diff = preds - labels
    return float(np.sum(diff * diff) / preds.shape[0])


def _min_pair(vectors: np.ndarray, metric: str):
    """Minimum pairwise distance and its lowest (i, j) pair, i < j."""
    k = vectors.shape[0]
    if k < 2:
        raise NumericError("diversity needs at least two prototypes")
    dists = pairwise_distances(vectors, vectors, metric)
    masked = np.where(np.triu(np.ones((k, k), dtype=bool), 1), dists, np.inf)
    flat = int(np.argmin(masked))
    i, j = divmod(flat, k)
    return float(masked[i, j]), i, j


def diversity_loss(prototypes: pl.PrototypeSet, cfg: LossConfig, metric: str = "euclidean") -> float:
    """sigmoid(eta * (delta - d_min)) over the closest prototype pair."""
    d_min, _, _ = _min_pair(prototypes.vectors, metric)
    return float(bb.sigmoid(np.array(cfg.eta * (cfg.delta - d_min))))


def diversity_loss_grad(prototypes: pl.PrototypeSet, cfg: LossConfig, metric: str = "euclidean"):
    """Loss value plus its gradient on the prototype matrix."""
    vectors = prototypes.vectors
    d_min, i, j = _min_pair(vectors, metric)
    value = float(bb.sigmoid(np.array(cfg.eta * (cfg.delta - d_min))))
    # dL/dd_min = -eta * sigma * (1 - sigma), then into the minimizing pair.
    coeff = -cfg.eta * value * (1.0 - value)
    gi, gj = distance_grad(vectors[i], vectors[j], metric)
    grad = np.zeros_like(vectors)
    grad[i] = coeff * gi
    grad[j] = coeff * gj
    return value, grad


def prototypicality_loss(embeddings: np.ndarray, prototypes: pl.PrototypeSet, metric: str = "euclidean") -> float:
    """Mean over sentences of the distance to the nearest prototype."""
    embeddings = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    dists = pairwise_distances(embeddings, prototypes.vectors, metric)
    return float(dists.min(axis=1).mean())


def prototypicality_loss_grad(embeddings: np.ndarray, prototypes: pl.PrototypeSet, metric: str = "euclidean"):
    """Loss value plus its gradient on the prototype matrix (embeddings frozen)."""
    embeddings = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    vectors = prototypes.vectors
    dists = pairwise_distances(embeddings, vectors, metric)
    nearest = np.argmin(dists, axis=1)
    s = embeddings.shape[0]
    value = float(dists[np.arange(s), nearest].mean())

    grad = np.zeros_like(vectors)
    if metric in ("euclidean", "sqeuclidean"):
        diff = vectors[nearest] - embeddings  # d(d)/d(p) direction, per sentence
        if metric == "euclidean":
            denom = np.maximum(dists[np.arange(s), nearest], NORM_EPS)[:, None]
            contrib = diff / denom
        else:
            contrib = 2.0 * diff
        np.add.at(grad, nearest, contrib / s)
    else:
        for row, k in enumerate(nearest):
            _, gp = distance_grad(embeddings[row], vectors[k], metric)
            grad[k] += gp / s
    return value, grad


def total_loss(
    embeddings_list: list[np.ndarray],
    labels: np.ndarray,
    prototypes: pl.PrototypeSet,
    backbone: bb.BackboneParams,
    sim_cfg: pl.SimilarityConfig,
    loss_cfg: LossConfig,
    proto_embeddings: np.ndarray,
    want_grads: bool = True,
    dropout_rate: float = 0.0,
    dropout_rng: np.random.Generator | None = None,
):
    """Combined loss over a batch of documents, with gradients.

    ``embeddings_list`` holds one T_i x J matrix per document and ``labels``
    the matching N x C multi-hot rows; ``proto_embeddings`` is the sentence
    matrix the prototypicality term averages over (the full corpus or a
    subsample). Returns (LossBreakdown, predictions, grads) where grads is
    a flat name-to-array dict covering the prototypes, every LSTM layer and
    the head; grads is None when ``want_grads`` is false.
    """
    labels = np.atleast_2d(np.asarray(labels, dtype=np.float64))
    n = len(embeddings_list)
    if labels.shape[0] != n:
        raise NumericError(f"{n} documents but {labels.shape[0]} label rows")

    preds = np.empty_like(labels)
    grads = None
    if want_grads:
        grads = {"prototypes": np.zeros_like(prototypes.vectors)}
        for l, layer in enumerate(backbone.layers):
            grads[f"lstm{l}.w_x"] = np.zeros_like(layer.w_x)
            grads[f"lstm{l}.w_h"] = np.zeros_like(layer.w_h)
            grads[f"lstm{l}.b"] = np.zeros_like(layer.b)
        grads["head.w"] = np.zeros_like(backbone.head_w)
        grads["head.b"] = np.zeros_like(backbone.head_b)

    caches = []
    for E in embeddings_list:
        layer_cache = pl.layer_forward(E, prototypes.vectors, sim_cfg)
        net_cache = bb.forward(layer_cache.output, backbone, dropout_rate, dropout_rng)
        caches.append((layer_cache, net_cache))
    for idx, (_, net_cache) in enumerate(caches):
        preds[idx] = net_cache.y_hat

    acc = accuracy_loss(preds, labels)
    if want_grads:
        for idx, (layer_cache, net_cache) in enumerate(caches):
            d_y = 2.0 * (preds[idx] - labels[idx]) / n
            net_grads, d_S = bb.backward(net_cache, backbone, d_y)
            _, d_P = pl.layer_backward(layer_cache, d_S)
            grads["prototypes"] += d_P
            for l, layer_grad in enumerate(net_grads.layers):
                grads[f"lstm{l}.w_x"] += layer_grad.w_x
                grads[f"lstm{l}.w_h"] += layer_grad.w_h
                grads[f"lstm{l}.b"] += layer_grad.b
            grads["head.w"] += net_grads.head_w
            grads["head.b"] += net_grads.head_b

        div, d_div = diversity_loss_grad(prototypes, loss_cfg, sim_cfg.metric)
        proto, d_proto = prototypicality_loss_grad(proto_embeddings, prototypes, sim_cfg.metric)
        grads["prototypes"] += loss_cfg.alpha * d_div + loss_cfg.beta * d_proto
    else:
        div = diversity_loss(prototypes, loss_cfg, sim_cfg.metric)
        proto = prototypicality_loss(proto_embeddings, prototypes, sim_cfg.metric)

    breakdown = LossBreakdown.combine(acc, div, proto, loss_cfg)
    return breakdown, preds, grads
