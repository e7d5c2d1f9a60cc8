"""Flat cosine-similarity vector index.

Retrieval is an exhaustive exact scan (no approximation): every entry is
scored against the query and the top k are returned sorted by descending
score, ties broken by ascending entry id, ranks numbered from 1. With
``dedupe_parents`` enabled at most one hit per parent document survives
(the best-scoring one), so augmented entries never produce duplicate
evidence.

Persistence format (version 1, all integers little-endian):

    bytes 0..7    magic  b"RAGIDX01"
    bytes 8..11   u32    CRC32 of everything after this field
    payload:
      u32 version (= 1)
      u32 dim
      u32 entry count
      u32 name length, then name bytes (UTF-8)
      per entry:
        u32 id length,  id bytes (UTF-8)
        u32 parent length, parent bytes (UTF-8)
        u8  entry kind (0 original, 1 rewrite, 2 synthetic query)
        u32 display-text length, display-text bytes (UTF-8)
        dim * f32 vector values

Any byte flip or truncation fails the CRC or a bounds check and raises
FormatError; loading never crashes on corrupt input.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .datasets import Corpus
from .embedding import EmbedderSpec, EmbeddingVector, embed_batch
from .errors import FormatError, ValidationError

_MAGIC = b"RAGIDX01"
_VERSION = 1


class EntryKind(Enum):
    ORIGINAL = 0
    REWRITE = 1
    SYNTHETIC_QUERY = 2


@dataclass(frozen=True)
class IndexEntry:
    entry_id: str
    vector: EmbeddingVector
    parent_doc_id: str
    entry_kind: EntryKind
    display_text: str

    def __post_init__(self):
        if not self.entry_id:
            raise ValidationError("index entry id must be non-empty")
        if not self.parent_doc_id:
            raise ValidationError(f"entry '{self.entry_id}' has no parent document id")


class VectorIndex:
    """Immutable store of embedded entries supporting exact top-k queries."""

    def __init__(self, dim: int, entries: list[IndexEntry], name: str = ""):
        if dim < 1:
            raise ValidationError("index dim must be positive")
        seen: set[str] = set()
        for entry in entries:
            if entry.vector.dim != dim:
                raise ValidationError(
                    f"entry '{entry.entry_id}' has dim {entry.vector.dim}, index dim is {dim}"
                )
            if entry.entry_id in seen:
                raise ValidationError(f"duplicate entry id '{entry.entry_id}'")
            seen.add(entry.entry_id)
        self.dim = dim
        self.entries = tuple(entries)
        self.name = name
        self._rows: list[np.ndarray] | None = None
        self._norms: list[float] | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def count_by_kind(self, kind: EntryKind) -> int:
        return sum(1 for e in self.entries if e.entry_kind is kind)

    def _scores(self, query: np.ndarray) -> np.ndarray:
        # Scores replicate cosine_similarity's arithmetic step for step so
        # an oracle built on that function matches bit for bit; a fused
        # matrix product would drift by an ulp and could reorder near-ties.
        if self._rows is None:
            self._rows = [e.vector.values.astype(np.float64) for e in self.entries]
            self._norms = [float(np.linalg.norm(row)) for row in self._rows]
        qnorm = np.linalg.norm(query)
        if qnorm == 0.0:
            raise ValidationError("query vector is all-zero")
        scores = np.empty(len(self._rows), dtype=np.float64)
        for i, (row, norm) in enumerate(zip(self._rows, self._norms)):
            scores[i] = np.dot(row, query) / (norm * qnorm)
        return np.clip(scores, -1.0, 1.0)


@dataclass(frozen=True)
class RetrievalHit:
    entry: IndexEntry
    score: float
    rank: int


def cosine_similarity(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """Cosine of the angle between two vectors, in [-1, 1]."""
    if u.dim != v.dim:
        raise ValidationError(f"dimension mismatch: {u.dim} vs {v.dim}")
    a = u.values.astype(np.float64)
    b = v.values.astype(np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValidationError("cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def build_index(corpus: Corpus, embedder: EmbedderSpec, name: str = "") -> VectorIndex:
    """Embed every corpus document into an index of ORIGINAL entries."""
    if len(corpus) == 0:
        raise ValidationError("cannot build an index from an empty corpus")
    try:
        vectors = embed_batch([doc.text for doc in corpus.documents], embedder)
    except Exception as exc:
        # Keep the original exception type; prepend corpus context.
        exc.args = (f"embedding corpus '{corpus.name}': {exc}",) + exc.args[1:]
        raise
    entries = [
        IndexEntry(
            entry_id=doc.id,
            vector=vec,
            parent_doc_id=doc.id,
            entry_kind=EntryKind.ORIGINAL,
            display_text=doc.text,
        )
        for doc, vec in zip(corpus.documents, vectors)
    ]
    return VectorIndex(dim=embedder.dim, entries=entries, name=name or corpus.name)


def retrieve_top_k(
    index: VectorIndex,
    query: EmbeddingVector,
    k: int,
    dedupe_parents: bool = True,
) -> list[RetrievalHit]:
    """Exact top-k entries by cosine score.

    Sorting is (score descending, entry_id ascending). When
    ``dedupe_parents`` is set, only the best entry per parent_doc_id is
    kept, evaluated in that same order, and k counts surviving hits.
    """
    if k < 0:
        raise ValidationError("k must be >= 0")
    if query.dim != index.dim:
        raise ValidationError(f"query dim {query.dim} != index dim {index.dim}")
    if k == 0 or len(index) == 0:
        return []
    scores = index._scores(query.values.astype(np.float64))
    order = sorted(range(len(index)), key=lambda i: (-scores[i], index.entries[i].entry_id))
    hits: list[RetrievalHit] = []
    seen_parents: set[str] = set()
    for i in order:
        entry = index.entries[i]
        if dedupe_parents:
            if entry.parent_doc_id in seen_parents:
                continue
            seen_parents.add(entry.parent_doc_id)
        hits.append(RetrievalHit(entry=entry, score=float(scores[i]), rank=len(hits) + 1))
        if len(hits) == k:
            break
    return hits


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


class _Reader:
    """Bounds-checked cursor over an in-memory buffer."""

    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.buf):
            raise FormatError("truncated file: payload shorter than its declared sizes")
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u8(self) -> int:
        return self.take(1)[0]

    def string(self) -> str:
        try:
            return self.take(self.u32()).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"invalid UTF-8 in string field: {exc}") from exc

    def done(self) -> bool:
        return self.pos == len(self.buf)


def save_index(index: VectorIndex, path: str | Path) -> None:
    """Write the index in the documented binary container format."""
    parts = [struct.pack("<III", _VERSION, index.dim, len(index.entries))]
    parts.append(_pack_str(index.name))
    for entry in index.entries:
        parts.append(_pack_str(entry.entry_id))
        parts.append(_pack_str(entry.parent_doc_id))
        parts.append(struct.pack("<B", entry.entry_kind.value))
        parts.append(_pack_str(entry.display_text))
        parts.append(entry.vector.values.astype("<f4").tobytes())
    payload = b"".join(parts)
    crc = zlib.crc32(payload) & 0xFFFFFFFF
    Path(path).write_bytes(_MAGIC + struct.pack("<I", crc) + payload)


def load_index(path: str | Path) -> VectorIndex:
    """Load an index file; corrupt or truncated input raises FormatError."""
    blob = Path(path).read_bytes()
    if len(blob) < len(_MAGIC) + 4:
        raise FormatError(f"{path}: file too short to be an index")
    if blob[: len(_MAGIC)] != _MAGIC:
        raise FormatError(f"{path}: bad magic bytes (not an index file)")
    (crc,) = struct.unpack("<I", blob[len(_MAGIC) : len(_MAGIC) + 4])
    payload = blob[len(_MAGIC) + 4 :]
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise FormatError(f"{path}: checksum mismatch (file is corrupt)")
    reader = _Reader(payload)
    try:
        version = reader.u32()
        if version != _VERSION:
            raise FormatError(f"{path}: unsupported index version {version}")
        dim = reader.u32()
        count = reader.u32()
        name = reader.string()
        entries = []
        for _ in range(count):
            entry_id = reader.string()
            parent = reader.string()
            kind_byte = reader.u8()
            display = reader.string()
            raw = reader.take(4 * dim)
            vector = np.frombuffer(raw, dtype="<f4").astype(np.float32)
            try:
                kind = EntryKind(kind_byte)
            except ValueError as exc:
                raise FormatError(f"{path}: unknown entry kind {kind_byte}") from exc
            entries.append(
                IndexEntry(
                    entry_id=entry_id,
                    vector=EmbeddingVector(vector),
                    parent_doc_id=parent,
                    entry_kind=kind,
                    display_text=display,
                )
            )
        if not reader.done():
            raise FormatError(f"{path}: trailing bytes after last entry")
        return VectorIndex(dim=dim, entries=entries, name=name)
    except FormatError:
        raise
    except (ValidationError, struct.error, ValueError, OverflowError) as exc:
        raise FormatError(f"{path}: malformed index payload: {exc}") from exc
