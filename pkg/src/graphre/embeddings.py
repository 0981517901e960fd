"""Word-level feature providers standing in for a frozen encoder.

Every provider returns a (|V|, d_f) tensor for a document: row 0 is a
trainable root vector, rows 1.. are word features. Precomputed and
hash-random rows are constants; only the lookup provider trains them.

Precomputed store layout (little-endian)::

    b"GREMB"  uint32 version(=1)  uint32 d_f  uint32 n_records
    repeated n_records times:
        uint32 id_nbytes  utf-8 id  uint32 n_rows  float32[n_rows * d_f]

``n_rows`` is the number of words; subword averaging happens offline.
"""
from __future__ import annotations

import hashlib
import struct
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from .data.documents import Document
from .errors import ConfigError, DataIntegrityError, FormatError, LookupFailure
from .numerics import ops
from .numerics.nn import Module, Parameter
from .numerics.tensor import Tensor

MAGIC = b"GREMB"
VERSION = 1


def average_subwords(subword_vectors: np.ndarray, word_ids: Sequence[int]) -> np.ndarray:
    """Plain mean of the subword rows belonging to each word.

    ``word_ids[t]`` names the word of subword ``t``; words are numbered
    0..n-1 in order.
    """
    subword_vectors = np.asarray(subword_vectors, dtype=np.float64)
    word_ids = np.asarray(word_ids)
    n = int(word_ids.max()) + 1
    out = np.zeros((n, subword_vectors.shape[1]))
    counts = np.bincount(word_ids, minlength=n)
    np.add.at(out, word_ids, subword_vectors)
    return out / counts[:, None]


class EmbeddingProvider(Module):
    kind = "abstract"

    def __init__(self, d_f: int, seed: int = 0):
        if d_f <= 0:
            raise ConfigError(f"d_f must be positive, got {d_f}")
        self.d_f = d_f
        self.seed = seed
        self.root = Parameter(np.random.default_rng([seed, 7]).normal(0.0, 1.0, d_f))

    def word_features(self, doc: Document):
        raise NotImplementedError

    def embed(self, doc: Document) -> Tensor:
        words = self.word_features(doc)
        return ops.concat([ops.reshape(self.root, (1, self.d_f)), words], axis=0)

    def config(self) -> dict:
        return {"kind": self.kind, "d_f": self.d_f, "seed": self.seed}


class HashEmbeddingProvider(EmbeddingProvider):
    """Each word string maps to a fixed standard-normal vector seeded by a hash."""

    kind = "hash-random"

    def __init__(self, d_f: int, seed: int = 0):
        super().__init__(d_f, seed)
        self._cache: Dict[str, np.ndarray] = {}

    def vector(self, word: str) -> np.ndarray:
        vec = self._cache.get(word)
        if vec is None:
            digest = hashlib.blake2b(f"{self.seed}\x00{word}".encode("utf-8"), digest_size=16).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            vec = rng.standard_normal(self.d_f)
            vec.setflags(write=False)
            self._cache[word] = vec
        return vec

    def word_features(self, doc: Document) -> Tensor:
        return Tensor(np.stack([self.vector(w) for w in doc.words]))


def hash_embed_provider(seed: int, d_f: int) -> HashEmbeddingProvider:
    return HashEmbeddingProvider(d_f, seed)


class PrecomputedProvider(EmbeddingProvider):
    kind = "precomputed"

    def __init__(self, store: Mapping[str, np.ndarray], d_f: int, seed: int = 0, path: str = ""):
        super().__init__(d_f, seed)
        self.store = dict(store)
        self.path = path

    def word_features(self, doc: Document) -> Tensor:
        try:
            rows = self.store[doc.id]
        except KeyError:
            raise LookupFailure(f"no precomputed features for document {doc.id!r}") from None
        if rows.shape[0] != len(doc.words):
            raise DataIntegrityError(
                f"document {doc.id!r}: store has {rows.shape[0]} rows for {len(doc.words)} words")
        return Tensor(rows.astype(np.float64))

    def config(self) -> dict:
        return {**super().config(), "path": self.path}


def write_precomputed(path, store: Mapping[str, np.ndarray], d_f: int) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<III", VERSION, d_f, len(store)))
        for doc_id, rows in store.items():
            rows = np.asarray(rows, dtype="<f4")
            if rows.ndim != 2 or rows.shape[1] != d_f:
                raise ConfigError(f"record {doc_id!r}: expected (n, {d_f}) rows, got {rows.shape}")
            raw = doc_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)) + raw + struct.pack("<I", rows.shape[0]))
            fh.write(rows.tobytes())


def load_precomputed(path, d_f: Optional[int] = None, seed: int = 0) -> PrecomputedProvider:
    """Read a store; ``d_f`` (when given) must match the stored dimension."""
    buf = Path(path).read_bytes()
    if buf[:5] != MAGIC or len(buf) < 17:
        raise FormatError(f"{path}: not an embedding store")
    version, stored_d, n = struct.unpack_from("<III", buf, 5)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported store version {version}")
    if d_f is not None and d_f != stored_d:
        raise ConfigError(f"{path}: store has d_f={stored_d}, configuration expects {d_f}")
    pos = 17
    store = {}
    try:
        for _ in range(n):
            (id_len,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            raw = buf[pos:pos + id_len]
            if len(raw) != id_len:
                raise struct.error("short id")
            pos += id_len
            (rows,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            nbytes = rows * stored_d * 4
            if pos + nbytes > len(buf):
                raise struct.error("short matrix")
            store[raw.decode("utf-8")] = np.frombuffer(buf, dtype="<f4", count=rows * stored_d,
                                                       offset=pos).reshape(rows, stored_d)
            pos += nbytes
    except struct.error:
        raise FormatError(f"{path}: truncated embedding store") from None
    return PrecomputedProvider(store, stored_d, seed, path=str(path))


class LookupEmbeddingProvider(EmbeddingProvider):
    """Trainable table over the training vocabulary; unseen words share UNK."""

    kind = "trainable-lookup"

    def __init__(self, vocab: Iterable[str], d_f: int, seed: int = 0):
        super().__init__(d_f, seed)
        self.vocab: List[str] = sorted(set(vocab))
        self.index = {w: k + 1 for k, w in enumerate(self.vocab)}
        rng = np.random.default_rng([seed, 11])
        self.table = Parameter(rng.normal(0.0, 1.0, (len(self.vocab) + 1, d_f)))

    @classmethod
    def from_documents(cls, docs: Iterable[Document], d_f: int, seed: int = 0, min_count: int = 1):
        counts = Counter(w for d in docs for w in d.words)
        return cls([w for w, c in counts.items() if c >= min_count], d_f, seed)

    def word_features(self, doc: Document) -> Tensor:
        ids = np.array([self.index.get(w, 0) for w in doc.words])
        return self.table[ids]

    def config(self) -> dict:
        return {**super().config(), "vocab": list(self.vocab)}


def make_provider(kind: str, d_f: int, seed: int = 0, path: Optional[str] = None,
                  train_docs: Optional[Sequence[Document]] = None) -> EmbeddingProvider:
    if kind == "hash-random":
        return HashEmbeddingProvider(d_f, seed)
    if kind == "precomputed":
        if not path:
            raise ConfigError("precomputed embeddings need a store path")
        return load_precomputed(path, d_f, seed)
    if kind == "trainable-lookup":
        if train_docs is None:
            raise ConfigError("trainable-lookup embeddings need training documents")
        return LookupEmbeddingProvider.from_documents(train_docs, d_f, seed)
    raise ConfigError(f"unknown embedding provider kind {kind!r}")


def provider_from_config(cfg: Mapping) -> EmbeddingProvider:
    """Rebuild a provider from its ``config()`` record (as stored in checkpoints)."""
    kind = cfg.get("kind")
    if kind == "trainable-lookup":
        return LookupEmbeddingProvider(cfg["vocab"], int(cfg["d_f"]), int(cfg.get("seed", 0)))
    return make_provider(kind, int(cfg["d_f"]), int(cfg.get("seed", 0)), cfg.get("path"))
