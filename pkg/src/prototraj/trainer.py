"""End-to-end training.

Prototypes start at k-medoids of the training-sentence embeddings, all
parameters (prototypes, LSTM stack, head) follow ADAM updates on the
combined loss, prototypes are projected onto the nearest real sentence
embedding every ``projection_period`` epochs and once more after training,
and each projected prototype finally receives a sentiment score by running
its own sentence through the trained network.

Sentence embeddings are computed once up front (the encoder is frozen),
so the per-epoch cost is the prototype layer plus the backbone only.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import backbone as bb
from . import prototypes as pl
from .clustering import kmedoids, subsample_indices
from .errors import CacheMissError, DataError, NumericError
from .ingest import Document, LabeledCorpus
from .losses import LossConfig, total_loss
from .metrics import pairwise_distances
from .model import ModelState, parameter_dict, predict_embedded

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """Moment accumulators for one named-parameter family."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.lr < 0:
            raise NumericError("lr must be >= 0")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise NumericError("beta1 and beta2 must lie in [0, 1)")
        if self.epsilon <= 0:
            raise NumericError("epsilon must be positive")

    @classmethod
    def create(cls, params: dict[str, np.ndarray], lr: float = 1e-4, **kwargs) -> "AdamState":
        state = cls(lr=lr, **kwargs)
        state.m = {name: np.zeros_like(arr) for name, arr in params.items()}
        state.v = {name: np.zeros_like(arr) for name, arr in params.items()}
        return state


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState) -> None:
    """One bias-corrected ADAM update, applied to the arrays in place."""
    state.t += 1
    b1t = 1.0 - state.beta1**state.t
    b2t = 1.0 - state.beta2**state.t
    for name, param in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        param -= state.lr * (m / b1t) / (np.sqrt(v / b2t) + state.epsilon)


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    projection_period: int = 10
    num_prototypes: int = 200
    seed: int = 0
    patience: int = 10
    validation_fraction: float = 0.1
    lr: float = 1e-4
    hidden_size: int = 128
    num_layers: int = 2
    dropout: float = 0.5
    positive_class: int = 1
    proto_sample: int = 512
    cluster_cap: int = 20000
    kmedoids_max_iter: int = 50

    def __post_init__(self):
        if self.epochs < 1:
            raise NumericError("epochs must be >= 1")
        if self.batch_size < 1:
            raise NumericError("batch_size must be >= 1")
        if self.projection_period < 1:
            raise NumericError("projection_period must be >= 1")
        if self.num_prototypes < 2:
            raise NumericError("num_prototypes must be >= 2")
        if self.patience < 1:
            raise NumericError("patience must be >= 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise NumericError("validation_fraction must lie in [0, 1)")
        if self.lr < 0:
            raise NumericError("lr must be >= 0")
        if self.hidden_size < 1 or self.num_layers < 1:
            raise NumericError("hidden_size and num_layers must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise NumericError("dropout must lie in [0, 1)")
        if self.positive_class < 0:
            raise NumericError("positive_class must be >= 0")
        if self.proto_sample < 1:
            raise NumericError("proto_sample must be >= 1")
        if self.cluster_cap < 2:
            raise NumericError("cluster_cap must be >= 2")


def embed_unique(sentences, provider) -> dict[str, np.ndarray]:
    """Embed each distinct sentence once; report every miss in one error."""
    unique = list(dict.fromkeys(sentences))
    missing = [s for s in unique if not provider.covers(s)]
    if missing:
        raise CacheMissError(missing)
    return {s: provider.embed(s) for s in unique}


def init_prototypes(
    corpus: LabeledCorpus,
    provider,
    k: int,
    seed: int,
    metric: str = "euclidean",
    cluster_cap: int = 20000,
    max_iter: int = 50,
) -> pl.PrototypeSet:
    """K-medoids over the corpus sentence embeddings; medoids become prototypes."""
    sentences = corpus.all_sentences()
    if k > len(sentences):
        raise DataError(f"k={k} exceeds the {len(sentences)} corpus sentences")
    table = embed_unique(sentences, provider)
    points = np.stack([table[s] for s in sentences])

    ss = np.random.SeedSequence(seed)
    sub_seed, med_seed = (int(child.generate_state(1)[0]) for child in ss.spawn(2))
    pool = subsample_indices(len(sentences), cluster_cap, sub_seed)
    if k > pool.size:
        pool = np.arange(len(sentences))
    result = kmedoids(points[pool], k, metric=metric, seed=med_seed, max_iter=max_iter)
    chosen = [int(pool[i]) for i in result.medoid_indices]
    return pl.PrototypeSet(
        vectors=points[chosen].copy(),
        texts=[sentences[i] for i in chosen],
    )


def project_prototypes(
    prototypes: pl.PrototypeSet,
    embeddings: np.ndarray,
    texts: list[str],
    metric: str = "euclidean",
) -> None:
    """Replace each prototype with its nearest sentence embedding, in place.

    Ties go to the lowest sentence index, the copy is bit-exact, and the
    operation is idempotent: a prototype already sitting on a sentence
    embedding stays there.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.shape[0] != len(texts):
        raise DataError("embeddings and texts disagree on sentence count")
    dists = pairwise_distances(prototypes.vectors, embeddings, metric)
    nearest = np.argmin(dists, axis=1)
    prototypes.vectors[...] = embeddings[nearest]
    prototypes.texts = [texts[int(i)] for i in nearest]


def score_prototype_sentiments(model: ModelState) -> np.ndarray:
    """Run each projected prototype's own sentence through the network.

    The prototype vector is bit-exact the embedding of its sentence, so the
    single-sentence document reduces to a 1 x J matrix of the vector itself.
    Scores are the positive-class component of the prediction, stored on the
    prototype set and returned.
    """
    if model.prototypes.texts is None:
        raise DataError("prototypes have no texts; project before scoring")
    positive = model.positive_class
    if positive >= model.num_classes:
        raise DataError(f"positive class {positive} out of range for {model.num_classes} classes")
    scores = np.empty(model.prototypes.count, dtype=np.float64)
    for k in range(model.prototypes.count):
        y_hat, _ = predict_embedded(model, model.prototypes.vectors[k : k + 1])
        scores[k] = y_hat[positive]
    model.prototypes.sentiment_scores = scores
    return scores


def _term_check(breakdown) -> None:
    for term in ("acc", "div", "proto", "total"):
        if not np.isfinite(getattr(breakdown, term)):
            raise NumericError(f"non-finite {term} loss; aborting training")


def _doc_embeddings(docs: list[Document], table: dict[str, np.ndarray]) -> list[np.ndarray]:
    return [np.stack([table[s] for s in doc.sentences]) for doc in docs]


def _accuracy(model: ModelState, embeddings: list[np.ndarray], labels: np.ndarray) -> float:
    correct = 0
    for E, label in zip(embeddings, labels):
        _, cls = predict_embedded(model, E)
        correct += int(cls == int(np.argmax(label)))
    return correct / len(embeddings)


def train(
    corpus: LabeledCorpus,
    provider,
    cfg: TrainConfig,
    sim_cfg: pl.SimilarityConfig | None = None,
    loss_cfg: LossConfig | None = None,
):
    """Full training loop; returns (model, per-epoch history).

    Each history row records the epoch's mean loss terms, the accuracy over
    the shuffled training batches (measured on the dropout forward passes),
    and the held-out validation accuracy (None when no split).
    """
    sim_cfg = sim_cfg or pl.SimilarityConfig()
    loss_cfg = loss_cfg or LossConfig()

    n = len(corpus.documents)
    children = np.random.SeedSequence(cfg.seed).spawn(6)
    split_rng = np.random.default_rng(children[0])
    init_seed = int(children[1].generate_state(1)[0])
    net_rng = np.random.default_rng(children[2])
    shuffle_rng = np.random.default_rng(children[3])
    dropout_rng = np.random.default_rng(children[4])
    sample_rng = np.random.default_rng(children[5])

    val_count = int(round(cfg.validation_fraction * n))
    if cfg.validation_fraction > 0 and n >= 2:
        val_count = min(max(val_count, 1), n - 1)
    else:
        val_count = 0
    order = split_rng.permutation(n)
    val_docs = [corpus.documents[i] for i in order[:val_count]]
    train_docs = [corpus.documents[i] for i in order[val_count:]]

    train_corpus = LabeledCorpus(documents=train_docs, num_classes=corpus.num_classes)
    prototypes = init_prototypes(
        train_corpus,
        provider,
        cfg.num_prototypes,
        init_seed,
        metric=sim_cfg.metric,
        cluster_cap=cfg.cluster_cap,
        max_iter=cfg.kmedoids_max_iter,
    )

    pool_texts = train_corpus.all_sentences()
    table = embed_unique(pool_texts + [s for d in val_docs for s in d.sentences], provider)
    pool_embeddings = np.stack([table[s] for s in pool_texts])
    train_E = _doc_embeddings(train_docs, table)
    train_labels = np.stack([d.label for d in train_docs])
    val_E = _doc_embeddings(val_docs, table) if val_docs else []
    val_labels = np.stack([d.label for d in val_docs]) if val_docs else None

    net = bb.init_backbone(
        cfg.num_prototypes, cfg.hidden_size, cfg.num_layers, corpus.num_classes, net_rng
    )
    if cfg.positive_class >= corpus.num_classes:
        raise DataError(
            f"positive class {cfg.positive_class} out of range for {corpus.num_classes} classes"
        )
    model = ModelState(
        prototypes=prototypes,
        backbone=net,
        sim_cfg=sim_cfg,
        loss_cfg=loss_cfg,
        metadata={"seed": cfg.seed, "positive_class": cfg.positive_class},
    )
    params = parameter_dict(model)
    adam = AdamState.create(params, lr=cfg.lr)

    history: list[dict] = []
    best_acc = -np.inf
    best_epoch = 0
    best_params: dict[str, np.ndarray] | None = None
    best_texts: list[str] | None = None
    stall = 0
    epochs_run = 0

    for epoch in range(1, cfg.epochs + 1):
        epochs_run = epoch
        perm = shuffle_rng.permutation(len(train_docs))
        sums = {"acc": 0.0, "div": 0.0, "proto": 0.0, "total": 0.0}
        batches = 0
        correct = 0
        for start in range(0, len(perm), cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            batch_E = [train_E[i] for i in idx]
            batch_labels = train_labels[idx]
            pool = np.concatenate(batch_E, axis=0)
            if pool.shape[0] > cfg.proto_sample:
                take = sample_rng.choice(pool.shape[0], size=cfg.proto_sample, replace=False)
                pool = pool[np.sort(take)]
            breakdown, preds, grads = total_loss(
                batch_E,
                batch_labels,
                model.prototypes,
                model.backbone,
                sim_cfg,
                loss_cfg,
                pool,
                dropout_rate=cfg.dropout,
                dropout_rng=dropout_rng,
            )
            _term_check(breakdown)
            adam_step(params, grads, adam)
            for term in sums:
                sums[term] += getattr(breakdown, term)
            batches += 1
            correct += int(np.sum(np.argmax(preds, axis=1) == np.argmax(batch_labels, axis=1)))

        if epoch % cfg.projection_period == 0:
            project_prototypes(model.prototypes, pool_embeddings, pool_texts, sim_cfg.metric)

        val_acc = _accuracy(model, val_E, val_labels) if val_docs else None
        history.append(
            {
                "epoch": epoch,
                "acc": sums["acc"] / batches,
                "div": sums["div"] / batches,
                "proto": sums["proto"] / batches,
                "total": sums["total"] / batches,
                "train_acc": correct / len(train_docs),
                "val_acc": val_acc,
            }
        )

        if val_acc is not None:
            if val_acc > best_acc:
                best_acc = val_acc
                best_epoch = epoch
                best_params = {name: arr.copy() for name, arr in params.items()}
                best_texts = list(model.prototypes.texts)
                stall = 0
            else:
                stall += 1
                if stall >= cfg.patience:
                    logger.info("early stop at epoch %d (best epoch %d)", epoch, best_epoch)
                    break

    if best_params is not None:
        for name, arr in params.items():
            arr[...] = best_params[name]
        model.prototypes.texts = best_texts

    project_prototypes(model.prototypes, pool_embeddings, pool_texts, sim_cfg.metric)
    score_prototype_sentiments(model)

    model.metadata.update(
        {
            "epochs_run": epochs_run,
            "best_epoch": best_epoch if best_params is not None else epochs_run,
            "history": history,
        }
    )
    return model, history
