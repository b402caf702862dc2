"""Exact vector store for demonstration retrieval.

A flat per-dataset index: search scans every entry of the question's dataset
and ranks by cosine similarity, so results are exact by construction. Scale
assumptions are a few thousand entries per dataset, which makes brute force
both the simplest and the fastest-to-trust option.

Writes go through a lock and publish an immutable snapshot; readers never
block and never observe a half-applied batch.

Persistence uses a little-endian binary format, magic "GENIDX1": a header of
dim and entry count, then one length-prefixed record per entry with the
vector stored as 32-bit floats. Vectors are quantized to float32 when an
entry is added, so a persist/load round trip is bit-exact.
"""

from __future__ import annotations

import struct
import threading
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding import EmbeddingVector

MAGIC = b"GENIDX1"


class DimensionMismatchError(ValueError):
    """Entry or query vector does not match the store's configured dimension."""


class DuplicateEntryError(ValueError):
    """An entry with the same (dataset_id, question) already exists."""


class IndexFormatError(ValueError):
    """Persisted index file is corrupt, truncated, or has an unknown version."""


class UnknownDatasetWarning(UserWarning):
    """Search was asked about a dataset the store has never seen."""


@dataclass(frozen=True)
class ExampleEntry:
    """One retrievable demonstration: a question paired with its gold SQL."""

    id: int
    dataset_id: str
    question: str
    sql: str
    embedding: EmbeddingVector
    tags: tuple[str, ...] = ()


@dataclass(frozen=True)
class SearchHit:
    entry: ExampleEntry
    score: float
    rank: int  # 1-based


class _DatasetShard:
    """Immutable per-dataset snapshot: entries plus a stacked score matrix."""

    __slots__ = ("entries", "matrix", "norms")

    def __init__(self, entries: tuple[ExampleEntry, ...]):
        self.entries = entries
        if entries:
            self.matrix = np.array([e.embedding.values for e in entries], dtype=np.float32)
            self.norms = np.linalg.norm(self.matrix.astype(np.float64), axis=1)
        else:
            self.matrix = np.empty((0, 0), dtype=np.float32)
            self.norms = np.empty((0,), dtype=np.float64)


class VectorIndex:
    """Flat exact-search index over ExampleEntry records, scoped by dataset."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self._lock = threading.Lock()
        self._shards: dict[str, _DatasetShard] = {}
        self._next_id = 1
        self._questions: set[tuple[str, str]] = set()

    # -- writes ------------------------------------------------------------

    def add_entry(
        self,
        dataset_id: str,
        question: str,
        sql: str,
        embedding: EmbeddingVector,
        tags: tuple[str, ...] = (),
    ) -> int:
        """Add one entry; returns its assigned id. Ids increase monotonically."""
        return self.add_many([(dataset_id, question, sql, embedding, tags)])[0]

    def add_many(
        self,
        items: list[tuple[str, str, str, EmbeddingVector, tuple[str, ...]]],
    ) -> list[int]:
        """Add a batch atomically: readers see either none or all of it.

        Raises before any mutation if an item has the wrong dimension or
        duplicates an existing (dataset_id, question) pair.
        """
        with self._lock:
            seen = set(self._questions)
            for dataset_id, question, _sql, embedding, _tags in items:
                if embedding.dim != self.dim:
                    raise DimensionMismatchError(
                        f"entry dim {embedding.dim} != index dim {self.dim}"
                    )
                key = (dataset_id, question)
                if key in seen:
                    raise DuplicateEntryError(
                        f"duplicate question for dataset {dataset_id!r}: {question!r}"
                    )
                seen.add(key)

            ids: list[int] = []
            staged: dict[str, list[ExampleEntry]] = {}
            for dataset_id, question, sql, embedding, tags in items:
                # Quantize to float32 here so in-memory state matches the
                # persisted form exactly.
                quantized = tuple(
                    float(v) for v in np.asarray(embedding.values, dtype=np.float32)
                )
                entry = ExampleEntry(
                    id=self._next_id,
                    dataset_id=dataset_id,
                    question=question,
                    sql=sql,
                    embedding=EmbeddingVector(values=quantized, dim=self.dim),
                    tags=tuple(tags),
                )
                self._next_id += 1
                ids.append(entry.id)
                staged.setdefault(dataset_id, []).append(entry)

            for dataset_id, new_entries in staged.items():
                old = self._shards.get(dataset_id)
                combined = (old.entries if old else ()) + tuple(new_entries)
                self._shards[dataset_id] = _DatasetShard(combined)
            self._questions = seen
            return ids

    # -- reads -------------------------------------------------------------

    def count(self, dataset_id: str | None = None) -> int:
        shards = self._shards
        if dataset_id is not None:
            shard = shards.get(dataset_id)
            return len(shard.entries) if shard else 0
        return sum(len(s.entries) for s in shards.values())

    def datasets(self) -> tuple[str, ...]:
        return tuple(sorted(self._shards))

    def has_dataset(self, dataset_id: str) -> bool:
        return dataset_id in self._shards

    def entries(self, dataset_id: str) -> tuple[ExampleEntry, ...]:
        """All entries of a dataset in id order (insertion order)."""
        shard = self._shards.get(dataset_id)
        return shard.entries if shard else ()

    def search(self, query: EmbeddingVector, k: int, dataset_id: str) -> list[SearchHit]:
        """Top-k entries of one dataset by cosine similarity.

        Ties are broken by ascending entry id. Fewer than k entries means
        fewer hits. An unknown dataset returns an empty list and emits
        UnknownDatasetWarning so callers can tell it apart from an empty pool.
        """
        if k < 0:
            raise ValueError("k must be non-negative")
        if query.dim != self.dim:
            raise DimensionMismatchError(
                f"query dim {query.dim} != index dim {self.dim}"
            )
        shard = self._shards.get(dataset_id)
        if shard is None:
            warnings.warn(
                f"search against unknown dataset {dataset_id!r}",
                UnknownDatasetWarning,
                stacklevel=2,
            )
            return []
        if k == 0 or not shard.entries:
            return []

        q = np.asarray(query.values, dtype=np.float64)
        q_norm = float(np.linalg.norm(q))
        if q_norm == 0.0:
            scores = np.zeros(len(shard.entries))
        else:
            dots = shard.matrix.astype(np.float64) @ q
            with np.errstate(divide="ignore", invalid="ignore"):
                scores = np.where(
                    shard.norms == 0.0, 0.0, dots / (shard.norms * q_norm)
                )
        order = sorted(
            range(len(shard.entries)),
            key=lambda i: (-scores[i], shard.entries[i].id),
        )[:k]
        return [
            SearchHit(entry=shard.entries[i], score=float(scores[i]), rank=rank)
            for rank, i in enumerate(order, start=1)
        ]

    # -- persistence ---------------------------------------------------------

    def persist(self, path: str | Path) -> None:
        """Write the store to disk; load() restores an equivalent store."""
        with self._lock:
            all_entries = sorted(
                (e for shard in self._shards.values() for e in shard.entries),
                key=lambda e: e.id,
            )
            buf = bytearray()
            buf += MAGIC
            buf += struct.pack("<II", self.dim, len(all_entries))
            for entry in all_entries:
                buf += struct.pack("<Q", entry.id)
                for field in (entry.dataset_id, entry.question, entry.sql):
                    raw = field.encode("utf-8")
                    buf += struct.pack("<I", len(raw)) + raw
                buf += struct.pack("<I", len(entry.tags))
                for tag in entry.tags:
                    raw = tag.encode("utf-8")
                    buf += struct.pack("<I", len(raw)) + raw
                buf += np.asarray(entry.embedding.values, dtype="<f4").tobytes()
            Path(path).write_bytes(bytes(buf))

    @classmethod
    def load(cls, path: str | Path) -> "VectorIndex":
        data = Path(path).read_bytes()
        reader = _Reader(data, path)
        if reader.take(len(MAGIC)) != MAGIC:
            raise IndexFormatError(f"{path}: not a GENIDX1 file")
        dim, count = struct.unpack("<II", reader.take(8))
        index = cls(dim=dim)
        items: list[tuple[str, str, str, EmbeddingVector, tuple[str, ...]]] = []
        ids: list[int] = []
        for _ in range(count):
            (entry_id,) = struct.unpack("<Q", reader.take(8))
            dataset_id = reader.take_string()
            question = reader.take_string()
            sql = reader.take_string()
            (tag_count,) = struct.unpack("<I", reader.take(4))
            tags = tuple(reader.take_string() for _ in range(tag_count))
            vec = np.frombuffer(reader.take(4 * dim), dtype="<f4")
            items.append(
                (
                    dataset_id,
                    question,
                    sql,
                    EmbeddingVector(values=tuple(float(v) for v in vec), dim=dim),
                    tags,
                )
            )
            ids.append(entry_id)
        if reader.remaining() != 0:
            raise IndexFormatError(f"{path}: trailing bytes after last entry")
        index._restore(items, ids)
        return index

    def _restore(
        self,
        items: list[tuple[str, str, str, EmbeddingVector, tuple[str, ...]]],
        ids: list[int],
    ) -> None:
        staged: dict[str, list[ExampleEntry]] = {}
        for (dataset_id, question, sql, embedding, tags), entry_id in zip(items, ids):
            key = (dataset_id, question)
            if key in self._questions:
                raise IndexFormatError(f"duplicate question in file: {question!r}")
            self._questions.add(key)
            staged.setdefault(dataset_id, []).append(
                ExampleEntry(entry_id, dataset_id, question, sql, embedding, tags)
            )
        for dataset_id, entries in staged.items():
            self._shards[dataset_id] = _DatasetShard(tuple(entries))
        self._next_id = max(ids, default=0) + 1


class _Reader:
    """Bounds-checked cursor over the persisted byte payload."""

    def __init__(self, data: bytes, path: str | Path):
        self._data = data
        self._pos = 0
        self._path = path

    def take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise IndexFormatError(f"{self._path}: truncated file")
        chunk = self._data[self._pos : self._pos + n]
        self._pos += n
        return chunk

    def take_string(self) -> str:
        (length,) = struct.unpack("<I", self.take(4))
        try:
            return self.take(length).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise IndexFormatError(f"{self._path}: invalid UTF-8 in record") from exc

    def remaining(self) -> int:
        return len(self._data) - self._pos
