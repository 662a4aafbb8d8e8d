"""Sentence embedding providers.

Training never runs an encoder: embeddings come either from a binary cache
file produced by an external encoder pass, or from a deterministic hashing
embedder good enough for tests and desk-scale runs. Cache entries are
stored as 32-bit floats and widened to float64 on load; all downstream
math is double precision.

Cache file layout (little-endian):
    magic  b"PTEC"
    u16    format version (currently 1)
    u32    embedding dimension J
    u64    entry count
    then per entry: u32 key length, UTF-8 key bytes, J float32 values
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .errors import CacheMissError, DataError
from .ingest import Document

CACHE_MAGIC = b"PTEC"
CACHE_VERSION = 1

_HEADER = struct.Struct("<4sHIQ")
_KEYLEN = struct.Struct("<I")


def hash_embed(sentence: str, dim: int, seed: int) -> np.ndarray:
    """Deterministic bag-of-tokens embedding on the unit sphere.

    Each whitespace token is hashed (keyed blake2b) to a signed position of
    a ``dim``-vector; token vectors are summed and the result is scaled to
    unit Euclidean norm. An all-zero accumulation maps to the first basis
    vector. Token order does not matter.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    vec = np.zeros(dim, dtype=np.float64)
    for token in sentence.split():
        digest = hashlib.blake2b(token.encode("utf-8"), key=key, digest_size=9).digest()
        idx = int.from_bytes(digest[:8], "little") % dim
        sign = 1.0 if digest[8] & 1 else -1.0
        vec[idx] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        vec[0] = 1.0
        return vec
    return vec / norm


class HashProvider:
    """Embedding provider backed by :func:`hash_embed`. Covers any sentence."""

    kind = "hash"

    def __init__(self, dim: int, seed: int = 0):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self.seed = seed

    def covers(self, sentence: str) -> bool:
        return True

    def embed(self, sentence: str) -> np.ndarray:
        return hash_embed(sentence, self.dim, self.seed)


class CacheProvider:
    """Embedding provider backed by a fixed sentence-to-vector map."""

    kind = "cache"

    def __init__(self, entries: dict[str, np.ndarray], dim: int):
        self.dim = dim
        self._entries = {}
        for key, vec in entries.items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (dim,):
                raise DataError(f"cache entry {key!r} has length {vec.shape}, expected ({dim},)")
            self._entries[key] = vec

    def __len__(self) -> int:
        return len(self._entries)

    def covers(self, sentence: str) -> bool:
        return sentence in self._entries

    def embed(self, sentence: str) -> np.ndarray:
        try:
            return self._entries[sentence]
        except KeyError:
            raise CacheMissError([sentence]) from None

    def keys(self):
        return self._entries.keys()


def embed_document(doc: Document, provider) -> np.ndarray:
    """Stack the provider's vectors for each sentence into a T x J matrix."""
    missing = [s for s in doc.sentences if not provider.covers(s)]
    if missing:
        raise CacheMissError(missing)
    rows = np.empty((len(doc.sentences), provider.dim), dtype=np.float64)
    for t, sentence in enumerate(doc.sentences):
        rows[t] = provider.embed(sentence)
    return rows


def write_cache(path, entries: dict[str, np.ndarray], dim: int) -> None:
    """Write an embedding cache file; keys are stored sorted for stable bytes."""
    keys = sorted(entries)
    for key in keys:
        vec = np.asarray(entries[key])
        if vec.shape != (dim,):
            raise DataError(f"cache entry {key!r} has shape {vec.shape}, expected ({dim},)")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, dim, len(keys)))
        for key in keys:
            raw = key.encode("utf-8")
            fh.write(_KEYLEN.pack(len(raw)))
            fh.write(raw)
            fh.write(np.asarray(entries[key], dtype="<f4").tobytes())


def load_cache(path) -> CacheProvider:
    """Load a cache file, widening vectors to float64."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise DataError(f"{path}: truncated cache header")
    magic, version, dim, count = _HEADER.unpack_from(data, 0)
    if magic != CACHE_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}, expected {CACHE_MAGIC!r}")
    if version != CACHE_VERSION:
        raise DataError(f"{path}: unsupported cache version {version}")
    offset = _HEADER.size
    entries: dict[str, np.ndarray] = {}
    vec_bytes = 4 * dim
    for _ in range(count):
        if offset + _KEYLEN.size > len(data):
            raise DataError(f"{path}: truncated cache entry")
        (key_len,) = _KEYLEN.unpack_from(data, offset)
        offset += _KEYLEN.size
        if offset + key_len + vec_bytes > len(data):
            raise DataError(f"{path}: truncated cache entry")
        key = data[offset : offset + key_len].decode("utf-8")
        offset += key_len
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).astype(np.float64)
        offset += vec_bytes
        entries[key] = vec
    if offset != len(data):
        raise DataError(f"{path}: {len(data) - offset} trailing byte(s) after last entry")
    return CacheProvider(entries, dim)


def make_provider(source: str, dim: int = 0, seed: int = 0, cache_path=None):
    """Build a provider from a config-style source name ('hash' or 'cache')."""
    if source == "hash":
        return HashProvider(dim, seed)
    if source == "cache":
        if cache_path is None:
            raise DataError("embedding source 'cache' requires a cache path")
        return load_cache(cache_path)
    raise DataError(f"unknown embedding source {source!r}")
