"""Model state, prediction, and the on-disk archive format.

A trained model is one zip archive holding a JSON manifest (configs,
metadata, prototype texts, sentiment scores, format version) plus one raw
little-endian float64 blob per parameter tensor. The writer fixes entry
order, timestamps and compression so identical models produce identical
bytes, and the float blobs make save/load/predict bit-exact.
"""

from __future__ import annotations

import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import backbone as bb
from . import prototypes as pl
from .embedding import embed_document
from .errors import DataError
from .ingest import Document
from .losses import LossConfig

MODEL_FORMAT_VERSION = 1

# Fixed DOS timestamp for reproducible archives.
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


@dataclass
class ModelState:
    prototypes: pl.PrototypeSet
    backbone: bb.BackboneParams
    sim_cfg: pl.SimilarityConfig
    loss_cfg: LossConfig
    metadata: dict = field(default_factory=dict)

    @property
    def num_classes(self) -> int:
        return self.backbone.num_classes

    @property
    def positive_class(self) -> int:
        return int(self.metadata.get("positive_class", 1))


def parameter_dict(model: ModelState) -> dict[str, np.ndarray]:
    """Live views of every trainable tensor, keyed like the gradient dict."""
    params = {"prototypes": model.prototypes.vectors}
    for l, layer in enumerate(model.backbone.layers):
        params[f"lstm{l}.w_x"] = layer.w_x
        params[f"lstm{l}.w_h"] = layer.w_h
        params[f"lstm{l}.b"] = layer.b
    params["head.w"] = model.backbone.head_w
    params["head.b"] = model.backbone.head_b
    return params


def forward_document(model: ModelState, E: np.ndarray):
    """Shared evaluation path: prototype layer then backbone, no dropout.

    Returns (layer_cache, net_cache); explanations reuse the exact argmax
    sequence the prediction consumed.
    """
    layer_cache = pl.layer_forward(E, model.prototypes.vectors, model.sim_cfg)
    net_cache = bb.forward(layer_cache.output, model.backbone)
    return layer_cache, net_cache


def predict_embedded(model: ModelState, E: np.ndarray):
    """Prediction from a precomputed embedding matrix: (y_hat, class index)."""
    _, net_cache = forward_document(model, E)
    y_hat = net_cache.y_hat
    return y_hat, int(np.argmax(y_hat))


def predict(model: ModelState, doc: Document, provider):
    """Deterministic composition embed -> similarity -> sparsify -> backbone.

    Ties in the output argmax go to the lowest class index.
    """
    return predict_embedded(model, embed_document(doc, provider))


def _manifest(model: ModelState, tensors: dict[str, np.ndarray]) -> dict:
    scores = model.prototypes.sentiment_scores
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "similarity": {
            "metric": model.sim_cfg.metric,
            "psi": model.sim_cfg.psi,
            "gamma": model.sim_cfg.gamma,
            "sparse": model.sim_cfg.sparse,
        },
        "loss": {
            "alpha": model.loss_cfg.alpha,
            "beta": model.loss_cfg.beta,
            "delta": model.loss_cfg.delta,
            "eta": model.loss_cfg.eta,
        },
        "backbone": {
            "input_size": model.backbone.input_size,
            "hidden_size": model.backbone.hidden_size,
            "num_layers": model.backbone.num_layers,
            "num_classes": model.backbone.num_classes,
        },
        "prototype_texts": model.prototypes.texts,
        "sentiment_scores": None if scores is None else [float(s) for s in scores],
        "metadata": model.metadata,
        "tensors": [
            {"name": name, "shape": list(arr.shape), "file": f"tensors/{name}.f64"}
            for name, arr in sorted(tensors.items())
        ],
    }


def save_model(model: ModelState, path) -> None:
    """Write the model archive with reproducible bytes."""
    tensors = parameter_dict(model)
    manifest = _manifest(model, tensors)
    payload = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        info = zipfile.ZipInfo("manifest.json", date_time=_ZIP_EPOCH)
        zf.writestr(info, payload)
        for name, arr in sorted(tensors.items()):
            info = zipfile.ZipInfo(f"tensors/{name}.f64", date_time=_ZIP_EPOCH)
            zf.writestr(info, np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path) -> ModelState:
    """Read a model archive back into memory, bit-exact."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"model file not found: {path}")
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            blobs = {
                entry["name"]: (entry, zf.read(entry["file"])) for entry in manifest["tensors"]
            }
    except (zipfile.BadZipFile, KeyError) as exc:
        raise DataError(f"{path}: not a valid model archive ({exc})") from exc

    version = manifest.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model format version {version}")

    def tensor(name: str) -> np.ndarray:
        entry, raw = blobs[name]
        shape = tuple(entry["shape"])
        expected = int(np.prod(shape)) * 8
        if len(raw) != expected:
            raise DataError(f"{path}: tensor {name} has {len(raw)} bytes, expected {expected}")
        return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()

    arch = manifest["backbone"]
    layers = [
        bb.LSTMLayerParams(tensor(f"lstm{l}.w_x"), tensor(f"lstm{l}.w_h"), tensor(f"lstm{l}.b"))
        for l in range(arch["num_layers"])
    ]
    net = bb.BackboneParams(layers, tensor("head.w"), tensor("head.b"))

    scores = manifest["sentiment_scores"]
    prototypes = pl.PrototypeSet(
        vectors=tensor("prototypes"),
        texts=manifest["prototype_texts"],
        sentiment_scores=None if scores is None else np.asarray(scores, dtype=np.float64),
    )
    sim = manifest["similarity"]
    loss = manifest["loss"]
    return ModelState(
        prototypes=prototypes,
        backbone=net,
        sim_cfg=pl.SimilarityConfig(
            metric=sim["metric"], psi=sim["psi"], gamma=sim["gamma"], sparse=sim["sparse"]
        ),
        loss_cfg=LossConfig(
            alpha=loss["alpha"], beta=loss["beta"], delta=loss["delta"], eta=loss["eta"]
        ),
        metadata=manifest["metadata"],
    )
