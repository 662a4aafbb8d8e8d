"""Interpretable text-sequence classification over prototype trajectories.

Sentences are embedded, matched to a small set of trainable prototype
sentences, and the per-sentence prototype similarities feed an LSTM that
predicts the document label. Prototypes are kept on real training
sentences by periodic projection, so every prediction comes with a
faithful, human-readable trajectory of exemplar sentences.
"""

from .clustering import MedoidResult, kmedoids
from .config import RunConfig, load_config, save_config
from .embedding import CacheProvider, HashProvider, hash_embed, load_cache, make_provider, write_cache
from .errors import CacheMissError, ConfigError, DataError, NumericError, PrototrajError
from .explain import Explanation, TrajectoryStep, explain_document, render_report
from .ingest import (
    Document,
    LabeledCorpus,
    document_from_text,
    load_dataset,
    normalize_sentence,
    split_sentences,
)
from .losses import LossBreakdown, LossConfig, total_loss
from .model import ModelState, load_model, predict, save_model
from .prototypes import PrototypeSet, SimilarityConfig, similarity_matrix
from .synthetic import SynthSpec, generate, majority_vote_accuracy, write_jsonl
from .trainer import (
    AdamState,
    TrainConfig,
    adam_step,
    init_prototypes,
    project_prototypes,
    score_prototype_sentiments,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "CacheMissError",
    "CacheProvider",
    "ConfigError",
    "DataError",
    "Document",
    "Explanation",
    "HashProvider",
    "LabeledCorpus",
    "LossBreakdown",
    "LossConfig",
    "MedoidResult",
    "ModelState",
    "NumericError",
    "PrototrajError",
    "PrototypeSet",
    "RunConfig",
    "SimilarityConfig",
    "SynthSpec",
    "TrainConfig",
    "TrajectoryStep",
    "adam_step",
    "document_from_text",
    "explain_document",
    "generate",
    "hash_embed",
    "init_prototypes",
    "kmedoids",
    "load_cache",
    "load_config",
    "load_dataset",
    "load_model",
    "majority_vote_accuracy",
    "make_provider",
    "normalize_sentence",
    "predict",
    "project_prototypes",
    "render_report",
    "save_config",
    "save_model",
    "score_prototype_sentiments",
    "similarity_matrix",
    "split_sentences",
    "total_loss",
    "train",
    "write_cache",
    "write_jsonl",
]
