"""Corpus loading, sentence segmentation and normalization.

Raw text is segmented on ``.``, ``?`` and ``!``, then each sentence is
lowercased, stripped of ASCII punctuation and whitespace-collapsed.
Documents whose sentences all normalize to the empty string are dropped
(with a logged count) rather than rejected.
"""

from __future__ import annotations

import csv
import json
import logging
import re
import string
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

_DELIMITERS_RE = re.compile(r"[.?!]")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def split_sentences(text: str) -> list[str]:
    """Split raw text on sentence delimiters, dropping empty segments.

    Delimiters themselves are removed. Segments are returned in order and
    are not normalized; whitespace-only segments are discarded.
    """
    return [seg for seg in _DELIMITERS_RE.split(text) if seg.strip()]


def normalize_sentence(sentence: str) -> str:
    """Lowercase, strip ASCII punctuation, collapse whitespace, trim.

    Returns the empty string when nothing survives; callers drop such
    sentences.
    """
    return " ".join(sentence.lower().translate(_PUNCT_TABLE).split())


@dataclass
class RawRecord:
    """One corpus record before segmentation: raw text plus a class index."""

    text: str
    label: int

    def __post_init__(self):
        if not self.text.strip():
            raise DataError("record text is empty")
        if self.label < 0:
            raise DataError(f"negative label {self.label}")


@dataclass
class Document:
    """An ordered list of normalized sentences with a multi-hot label."""

    sentences: list[str]
    label: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        if len(self.sentences) == 0:
            raise DataError(f"document {self.source_id!r} has no sentences")
        if any(not s for s in self.sentences):
            raise DataError(f"document {self.source_id!r} contains an empty sentence")
        self.label = np.asarray(self.label, dtype=np.float64)
        if not np.all(np.isin(self.label, (0.0, 1.0))) or not self.label.any():
            raise DataError(f"document {self.source_id!r} label is not multi-hot")

    @property
    def num_sentences(self) -> int:
        return len(self.sentences)


@dataclass
class LabeledCorpus:
    """A list of documents sharing one label width."""

    documents: list[Document]
    num_classes: int
    dropped_empty: int = field(default=0, compare=False)

    def __post_init__(self):
        if len(self.documents) == 0:
            raise DataError("empty corpus")
        for doc in self.documents:
            if doc.label.shape != (self.num_classes,):
                raise DataError(
                    f"document {doc.source_id!r} label width {doc.label.shape[0]} "
                    f"!= corpus num_classes {self.num_classes}"
                )

    @property
    def total_sentences(self) -> int:
        return sum(doc.num_sentences for doc in self.documents)

    def all_sentences(self) -> list[str]:
        """Every sentence of every document, in corpus order."""
        return [s for doc in self.documents for s in doc.sentences]


def multi_hot(label: int, num_classes: int) -> np.ndarray:
    vec = np.zeros(num_classes, dtype=np.float64)
    vec[label] = 1.0
    return vec


def document_from_text(text: str, label: int, num_classes: int, source_id: str = "") -> Document | None:
    """Segment + normalize raw text into a Document; None if nothing survives."""
    sentences = [normalize_sentence(s) for s in split_sentences(text)]
    sentences = [s for s in sentences if s]
    if not sentences:
        return None
    return Document(sentences, multi_hot(label, num_classes), source_id)


def _read_jsonl(path: Path) -> list[tuple[int, str, int]]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{line_no}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict) or "text" not in obj or "label" not in obj:
                raise DataError(f"{path}:{line_no}: record must have 'text' and 'label'")
            text, label = obj["text"], obj["label"]
            if not isinstance(text, str) or isinstance(label, bool) or not isinstance(label, int):
                raise DataError(f"{path}:{line_no}: 'text' must be a string and 'label' an integer")
            records.append((line_no, text, label))
    return records


def _read_csv(path: Path) -> list[tuple[int, str, int]]:
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"text", "label"} <= set(reader.fieldnames):
            raise DataError(f"{path}: CSV header must contain 'text' and 'label' columns")
        for row in reader:
            line_no = reader.line_num
            text, label = row.get("text"), row.get("label")
            if text is None or label is None:
                raise DataError(f"{path}:{line_no}: missing 'text' or 'label' field")
            try:
                label_int = int(label)
            except ValueError as exc:
                raise DataError(f"{path}:{line_no}: label {label!r} is not an integer") from exc
            records.append((line_no, text, label_int))
    return records


def load_dataset(path, format: str = "jsonl", num_classes: int | None = None) -> LabeledCorpus:
    """Load a labeled corpus from a JSONL or CSV file.

    The label width is ``num_classes`` when given (records must fit), else
    inferred as ``max label + 1``. Documents that lose every sentence to
    normalization are dropped and counted.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    if format == "jsonl":
        raw = _read_jsonl(path)
    elif format == "csv":
        raw = _read_csv(path)
    else:
        raise DataError(f"unknown dataset format {format!r}")
    if not raw:
        raise DataError(f"{path}: empty corpus")

    for line_no, text, label in raw:
        if not text.strip():
            raise DataError(f"{path}:{line_no}: record text is empty")
        if label < 0:
            raise DataError(f"{path}:{line_no}: negative label {label}")
    if num_classes is None:
        num_classes = max(label for _, _, label in raw) + 1
    else:
        for line_no, _, label in raw:
            if label >= num_classes:
                raise DataError(f"{path}:{line_no}: label {label} >= num_classes {num_classes}")

    documents = []
    dropped = 0
    for idx, (line_no, text, label) in enumerate(raw):
        doc = document_from_text(text, label, num_classes, source_id=f"{path.stem}:{idx:06d}")
        if doc is None:
            dropped += 1
        else:
            documents.append(doc)
    if dropped:
        logger.warning("%s: dropped %d record(s) with no surviving sentences", path, dropped)
    if not documents:
        raise DataError(f"{path}: empty corpus")
    return LabeledCorpus(documents, num_classes, dropped_empty=dropped)
