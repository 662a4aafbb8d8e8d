"""Command-line interface.

One flat config file drives five subcommands: embed-cache, train, eval,
predict, and explain. Every command resolves defaults, writes the
effective config next to its outputs, and is bit-deterministic given
(config, seed); the worker count only parallelizes embedding and never
changes results.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config, save_config
from .embedding import HashProvider, hash_embed, load_cache, write_cache
from .errors import ConfigError, DataError, NumericError, PrototrajError
from .explain import REPORT_FORMATS, explain_document, render_report
from .ingest import LabeledCorpus, document_from_text, load_dataset
from .model import load_model, predict, save_model
from .trainer import train

_EXTENSIONS = {"json": "json", "markdown": "md", "svg": "svg"}


def _make_provider(cfg: RunConfig):
    if cfg.embedding_source == "hash":
        return HashProvider(cfg.hash_dim, cfg.hash_seed)
    if cfg.embedding_source == "cache":
        if not cfg.cache_path:
            raise ConfigError("embedding_source = cache requires cache_path")
        return load_cache(cfg.cache_path)
    raise ConfigError(f"unknown embedding_source {cfg.embedding_source!r}")


def _load_corpus(cfg: RunConfig, path: str, num_classes: int | None = None) -> LabeledCorpus:
    return load_dataset(path, format=cfg.data_format, num_classes=num_classes or cfg.num_classes)


def _resolve_out_dir(cfg: RunConfig, args) -> Path:
    out = Path(args.out_dir) if args.out_dir else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.out_dir = str(out)
    return out


def _eval_data_path(cfg: RunConfig, args) -> str:
    path = args.data or cfg.test_path or cfg.val_path
    if not path:
        raise ConfigError("no dataset: pass --data or set test_path/val_path")
    return path


def _model_path(cfg: RunConfig, args) -> Path:
    if args.model:
        return Path(args.model)
    return Path(cfg.out_dir) / "model.ptmodel"


def _all_sentences(cfg: RunConfig) -> list[str]:
    paths = [p for p in (cfg.train_path, cfg.val_path, cfg.test_path) if p]
    if not paths:
        raise ConfigError("no dataset paths configured")
    seen: dict[str, None] = {}
    for path in paths:
        for doc in _load_corpus(cfg, path).documents:
            for sentence in doc.sentences:
                seen.setdefault(sentence, None)
    return list(seen)


def cmd_embed_cache(cfg: RunConfig, args) -> int:
    out = _resolve_out_dir(cfg, args)
    sentences = sorted(_all_sentences(cfg))
    if cfg.embedding_source == "hash":
        if not cfg.cache_path:
            cfg.cache_path = str(out / "embeddings.cache")
        workers = args.workers or os.cpu_count() or 1
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vectors = list(pool.map(lambda s: hash_embed(s, cfg.hash_dim, cfg.hash_seed), sentences))
        write_cache(cfg.cache_path, dict(zip(sentences, vectors)), cfg.hash_dim)
        uncovered: list[str] = []
    else:
        if not cfg.cache_path:
            raise ConfigError("embedding_source = cache requires cache_path")
        cache_file = Path(cfg.cache_path)
        if cache_file.exists():
            provider = load_cache(cache_file)
            uncovered = [s for s in sentences if not provider.covers(s)]
        else:
            uncovered = sentences
    manifest = out / "uncovered.json"
    manifest.write_text(json.dumps(uncovered, indent=2, sort_keys=True), encoding="utf-8")
    save_config(cfg, out / "effective.toml")
    print(f"{len(sentences)} sentences, {len(uncovered)} uncovered")
    return 0


def _history_csv(history: list[dict], path: Path) -> None:
    columns = ["epoch", "acc", "div", "proto", "total", "train_acc", "val_acc"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in history:
            writer.writerow(["" if row[c] is None else row[c] for c in columns])


def cmd_train(cfg: RunConfig, args) -> int:
    if not cfg.train_path:
        raise ConfigError("train requires train_path")
    out = _resolve_out_dir(cfg, args)
    corpus = _load_corpus(cfg, cfg.train_path)
    provider = _make_provider(cfg)
    model, history = train(corpus, provider, cfg.train_config(), cfg.sim_config(), cfg.loss_config())

    model_file = out / "model.ptmodel"
    save_model(model, model_file)
    final = history[-1]
    metrics = {
        "epochs_run": model.metadata["epochs_run"],
        "best_epoch": model.metadata["best_epoch"],
        "final_train_acc": final["train_acc"],
        "final_val_acc": final["val_acc"],
        "history": history,
    }
    (out / "metrics.json").write_text(
        json.dumps(metrics, indent=2, sort_keys=True), encoding="utf-8"
    )
    _history_csv(history, out / "history.csv")
    save_config(cfg, out / "effective.toml")
    print(f"trained {model.metadata['epochs_run']} epochs, model written to {model_file}")
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    out = _resolve_out_dir(cfg, args)
    model = load_model(_model_path(cfg, args))
    corpus = _load_corpus(cfg, _eval_data_path(cfg, args), num_classes=model.num_classes)
    provider = _make_provider(cfg)

    confusion = np.zeros((model.num_classes, model.num_classes), dtype=np.int64)
    for doc in corpus.documents:
        _, predicted = predict(model, doc, provider)
        confusion[int(np.argmax(doc.label)), predicted] += 1
    accuracy = float(np.trace(confusion) / len(corpus.documents))

    report = {
        "accuracy": accuracy,
        "confusion": confusion.tolist(),
        "num_documents": len(corpus.documents),
    }
    (out / "eval.json").write_text(json.dumps(report, indent=2, sort_keys=True), encoding="utf-8")
    save_config(cfg, out / "effective.toml")
    print(f"accuracy {accuracy:.4f} over {len(corpus.documents)} documents")
    return 0


def cmd_predict(cfg: RunConfig, args) -> int:
    out = _resolve_out_dir(cfg, args)
    model = load_model(_model_path(cfg, args))
    corpus = _load_corpus(cfg, _eval_data_path(cfg, args), num_classes=model.num_classes)
    provider = _make_provider(cfg)

    with open(out / "predictions.jsonl", "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            y_hat, predicted = predict(model, doc, provider)
            record = {
                "doc_id": doc.source_id,
                "prediction": [float(v) for v in y_hat],
                "predicted_class": predicted,
            }
            fh.write(json.dumps(record) + "\n")
    save_config(cfg, out / "effective.toml")
    print(f"wrote predictions for {len(corpus.documents)} documents")
    return 0


def cmd_explain(cfg: RunConfig, args) -> int:
    out = _resolve_out_dir(cfg, args)
    model = load_model(_model_path(cfg, args))
    provider = _make_provider(cfg)
    fmt = args.format or "json"
    if fmt not in REPORT_FORMATS:
        raise ConfigError(f"unknown format {fmt!r}; expected one of {REPORT_FORMATS}")

    if args.text:
        doc = document_from_text(args.text, label=0, num_classes=model.num_classes, source_id="input")
        if doc is None:
            raise DataError("no sentences survived preprocessing of --text input")
        docs = [doc]
    else:
        corpus = _load_corpus(cfg, _eval_data_path(cfg, args), num_classes=model.num_classes)
        docs = corpus.documents
        if args.limit is not None:
            docs = docs[: args.limit]

    report_dir = out / "explanations"
    report_dir.mkdir(parents=True, exist_ok=True)
    ext = _EXTENSIONS[fmt]
    for i, doc in enumerate(docs):
        explanation = explain_document(model, doc, provider)
        (report_dir / f"doc-{i:05d}.{ext}").write_bytes(render_report(explanation, fmt))
    save_config(cfg, out / "effective.toml")
    print(f"wrote {len(docs)} {fmt} reports to {report_dir}")
    return 0


_COMMANDS = {
    "embed-cache": cmd_embed_cache,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "explain": cmd_explain,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="path to the run config file")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out-dir", default=None, help="override the config output directory")
    common.add_argument("--workers", type=int, default=None, help="worker threads for embedding")
    common.add_argument("--format", default=None, choices=REPORT_FORMATS, help="report format")

    parser = argparse.ArgumentParser(prog="prototraj", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("embed-cache", "train"):
        sub.add_parser(name, parents=[common])
    for name in ("eval", "predict", "explain"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--model", default=None, help="model file (default: out_dir/model.ptmodel)")
        p.add_argument("--data", default=None, help="dataset path (default: test_path or val_path)")
        if name == "explain":
            p.add_argument("--text", default=None, help="explain this raw text instead of a dataset")
            p.add_argument("--limit", type=int, default=None, help="explain only the first N documents")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return _COMMANDS[args.command](cfg, args)


def entrypoint(argv=None) -> int:
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except PrototrajError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(entrypoint())
