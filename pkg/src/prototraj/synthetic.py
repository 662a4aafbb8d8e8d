"""Seeded synthetic sentiment corpora with controllable trajectory twists.

Documents draw all sentences from one polarity's template pool; with a
configurable probability the final sentence flips to the opposite pool.
Labels follow either the final sentence's polarity (``last_sentence``) or
the majority polarity (``majority``, ties resolved by the final sentence).
Class index 1 means positive. A majority-vote baseline over sentence
polarities is provided as the oracle that trajectory-sensitive models must
beat on twisted corpora.

Generation derives one child RNG per document from (seed, index), so any
document subset can be produced independently and in parallel.
"""

from __future__ import annotations

import argparse
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .ingest import Document, LabeledCorpus, multi_hot, normalize_sentence

RULES = ("last_sentence", "majority")

# Word-disjoint pools: no token appears in two templates, so the hashed
# bag-of-words embeddings of any two templates are far apart while repeats
# of one template collapse to one point.
DEFAULT_POSITIVE = (
    "wonderful delightful meal tonight",
    "fantastic superb service throughout",
    "amazing lovely staff everywhere",
    "excellent brilliant flavors arrived",
    "perfect charming atmosphere inside",
)
DEFAULT_NEGATIVE = (
    "terrible awful food yesterday",
    "horrible dreadful waiters constantly",
    "disgusting bland dishes repeatedly",
    "miserable rude hosts always",
    "appalling greasy tables outside",
)


@dataclass
class SynthSpec:
    positive_pool: tuple[str, ...] = DEFAULT_POSITIVE
    negative_pool: tuple[str, ...] = DEFAULT_NEGATIVE
    num_documents: int = 1000
    min_sentences: int = 4
    max_sentences: int = 8
    twist_prob: float = 0.5
    rule: str = "last_sentence"
    seed: int = 0

    def __post_init__(self):
        if not self.positive_pool or not self.negative_pool:
            raise DataError("template pools must be non-empty")
        if set(self.positive_pool) & set(self.negative_pool):
            raise DataError("template pools must be disjoint")
        for template in (*self.positive_pool, *self.negative_pool):
            if normalize_sentence(template) != template or not template:
                raise DataError(f"template not in normalized form: {template!r}")
        if self.num_documents < 1:
            raise DataError("num_documents must be >= 1")
        if not 1 <= self.min_sentences <= self.max_sentences:
            raise DataError("need 1 <= min_sentences <= max_sentences")
        if not 0.0 <= self.twist_prob <= 1.0:
            raise DataError("twist_prob must lie in [0, 1]")
        if self.twist_prob > 0 and self.min_sentences < 2:
            raise DataError("twists need at least 2 sentences per document")
        if self.rule not in RULES:
            raise DataError(f"unknown rule {self.rule!r}; expected one of {RULES}")


def _label_positive(polarities: list[bool], rule: str) -> bool:
    if rule == "last_sentence":
        return polarities[-1]
    positives = sum(polarities)
    negatives = len(polarities) - positives
    if positives != negatives:
        return positives > negatives
    return polarities[-1]


def generate(spec: SynthSpec) -> LabeledCorpus:
    """Build the corpus ``spec`` describes, deterministically."""
    documents = []
    for i in range(spec.num_documents):
        rng = np.random.default_rng([spec.seed, i])
        count = int(rng.integers(spec.min_sentences, spec.max_sentences + 1))
        body_positive = bool(rng.integers(0, 2))
        twisted = bool(rng.random() < spec.twist_prob)
        body = spec.positive_pool if body_positive else spec.negative_pool
        other = spec.negative_pool if body_positive else spec.positive_pool

        sentences = [body[int(rng.integers(len(body)))] for _ in range(count)]
        polarities = [body_positive] * count
        if twisted:
            sentences[-1] = other[int(rng.integers(len(other)))]
            polarities[-1] = not body_positive

        label = 1 if _label_positive(polarities, spec.rule) else 0
        documents.append(Document(sentences, multi_hot(label, 2), source_id=f"synth-{i:05d}"))
    return LabeledCorpus(documents=documents, num_classes=2)


def write_jsonl(corpus: LabeledCorpus, path) -> None:
    """Emit the corpus as JSONL records of raw text plus integer label."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            record = {
                "text": ". ".join(doc.sentences) + ".",
                "label": int(np.argmax(doc.label)),
            }
            fh.write(json.dumps(record) + "\n")


def majority_vote_accuracy(
    corpus: LabeledCorpus,
    positive_pool=DEFAULT_POSITIVE,
    negative_pool=DEFAULT_NEGATIVE,
) -> float:
    """Accuracy of the order-blind baseline that votes sentence polarities.

    Each sentence votes by pool membership; ties predict positive. This is
    the strongest order-insensitive rule on these corpora, so beating it
    demonstrates trajectory sensitivity.
    """
    positive = set(positive_pool)
    negative = set(negative_pool)
    correct = 0
    for doc in corpus.documents:
        vote = 0
        for sentence in doc.sentences:
            if sentence in positive:
                vote += 1
            elif sentence in negative:
                vote -= 1
            else:
                raise DataError(f"sentence not in either pool: {sentence!r}")
        predicted = 1 if vote >= 0 else 0
        correct += int(predicted == int(np.argmax(doc.label)))
    return correct / len(corpus.documents)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="generate a synthetic twist corpus as JSONL")
    parser.add_argument("--out", required=True, help="output JSONL path")
    parser.add_argument("--docs", type=int, default=1000)
    parser.add_argument("--min-sentences", type=int, default=4)
    parser.add_argument("--max-sentences", type=int, default=8)
    parser.add_argument("--twist", type=float, default=0.5)
    parser.add_argument("--rule", choices=RULES, default="last_sentence")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    spec = SynthSpec(
        num_documents=args.docs,
        min_sentences=args.min_sentences,
        max_sentences=args.max_sentences,
        twist_prob=args.twist,
        rule=args.rule,
        seed=args.seed,
    )
    corpus = generate(spec)
    write_jsonl(corpus, Path(args.out))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
