"""Token vector sources: embedding files, static lookup tables, and the
overlapping-window policy for encoders with a bounded input length."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .corpus_io import Document
from .errors import (
    BadMagic,
    DimMismatch,
    EmbeddingError,
    InvalidParam,
    ShapeMismatch,
    TokenCountMismatch,
)

MAGIC = b"EMB1"


@dataclass
class EmbeddingMatrix:
    """Per-token vectors for one document.

    ``unknown`` optionally flags rows that had no entry in a static table; the
    model substitutes its trainable UNK vector there.
    """

    doc_id: str
    vectors: np.ndarray
    unknown: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise ShapeMismatch(f"{self.doc_id!r}: vectors must be a matrix, got shape {self.vectors.shape}")
        if not np.all(np.isfinite(self.vectors)):
            raise EmbeddingError(f"{self.doc_id!r}: non-finite embedding values")
        if self.unknown is not None:
            self.unknown = np.asarray(self.unknown, dtype=bool)
            if self.unknown.shape != (len(self.vectors),):
                raise ShapeMismatch(f"{self.doc_id!r}: unknown mask has wrong length")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.vectors)

    def __eq__(self, other):
        if not isinstance(other, EmbeddingMatrix):
            return NotImplemented
        return (
            self.doc_id == other.doc_id
            and self.vectors.shape == other.vectors.shape
            and self.vectors.tobytes() == other.vectors.tobytes()
        )


# -- overlapping segments ---------------------------------------------------


@dataclass(frozen=True)
class SegmentPlan:
    segments: tuple[tuple[int, int], ...]
    stride: int
    max_len: int = 512


def plan_segments(T: int, max_len: int = 512, stride: int | None = None) -> SegmentPlan:
    """Cover ``[0, T)`` with windows of at most ``max_len`` tokens.

    Window ``k`` starts at ``k * stride``; windows are added until one reaches
    the end of the document.  ``stride`` defaults to half the window.
    """
    if stride is None:
        stride = max(1, max_len // 2)
    if not 1 <= stride <= max_len:
        raise InvalidParam(f"need 1 <= stride <= max_len, got stride={stride}, max_len={max_len}")
    if T < 0:
        raise InvalidParam(f"T must be >= 0, got {T}")
    segments = []
    start = 0
    while True:
        segments.append((start, min(start + max_len, T)))
        if start + max_len >= T:
            break
        start += stride
    return SegmentPlan(tuple(segments), stride, max_len)


def _edge_distance(t: int, segment: tuple[int, int]) -> int:
    start, end = segment
    return min(t - start, end - t)


def merge_segment_vectors(plan: SegmentPlan, per_segment: Sequence, doc_id: str = "") -> EmbeddingMatrix:
    """Pick each token's vector from the window where it sits farthest from an edge.

    Distance is ``min(t - start, end - t)`` with ``end`` exclusive; ties go to
    the earlier window.
    """
    if len(per_segment) != len(plan.segments):
        raise ShapeMismatch(f"{len(per_segment)} segment outputs for {len(plan.segments)} segments")
    arrays = [np.asarray(v, dtype=np.float32) for v in per_segment]
    for (start, end), arr in zip(plan.segments, arrays):
        if arr.ndim != 2 or arr.shape[0] != end - start:
            raise ShapeMismatch(f"segment ({start},{end}) got array of shape {arr.shape}")
    dims = {arr.shape[1] for arr in arrays}
    if len(dims) != 1:
        raise ShapeMismatch(f"segments disagree on dimension: {sorted(dims)}")
    T = plan.segments[-1][1]
    out = np.empty((T, dims.pop()), dtype=np.float32)
    for t in range(T):
        best, best_dist = None, -1
        for k, seg in enumerate(plan.segments):
            if seg[0] <= t < seg[1] and _edge_distance(t, seg) > best_dist:
                best, best_dist = k, _edge_distance(t, seg)
        out[t] = arrays[best][t - plan.segments[best][0]]
    return EmbeddingMatrix(doc_id, out)


def encode_in_segments(
    doc_id: str,
    T: int,
    encode_window: Callable[[int, int], np.ndarray],
    max_len: int = 512,
    stride: int | None = None,
) -> EmbeddingMatrix:
    """Run a bounded-length encoder over overlapping windows and merge the outputs."""
    plan = plan_segments(T, max_len, stride)
    return merge_segment_vectors(plan, [encode_window(s, e) for s, e in plan.segments], doc_id)


# -- embedding files --------------------------------------------------------


def write_precomputed(path, matrices: Iterable[EmbeddingMatrix]) -> None:
    chunks = [MAGIC]
    for m in matrices:
        name = m.doc_id.encode("utf-8")
        n, d = m.vectors.shape
        chunks.append(struct.pack("<I", len(name)))
        chunks.append(name)
        chunks.append(struct.pack("<II", n, d))
        chunks.append(m.vectors.astype("<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_precomputed(path, docs: Sequence[Document] | None = None) -> dict[str, EmbeddingMatrix]:
    """Read an ``EMB1`` file; with ``docs`` given, cross-check token counts."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise BadMagic(f"{path}: not an embedding file (magic {data[:4]!r})")
    out: dict[str, EmbeddingMatrix] = {}
    pos, dim = 4, None
    try:
        while pos < len(data):
            (name_len,) = struct.unpack_from("<I", data, pos)
            pos += 4
            doc_id = data[pos:pos + name_len].decode("utf-8")
            pos += name_len
            n, d = struct.unpack_from("<II", data, pos)
            pos += 8
            if dim is None:
                dim = d
            elif d != dim:
                raise DimMismatch(doc_id, dim, d)
            nbytes = 4 * n * d
            if pos + nbytes > len(data):
                raise EmbeddingError(f"{path}: truncated record for {doc_id!r}")
            vectors = np.frombuffer(data, dtype="<f4", count=n * d, offset=pos).reshape(n, d)
            pos += nbytes
            out[doc_id] = EmbeddingMatrix(doc_id, vectors.astype(np.float32))
    except struct.error:
        raise EmbeddingError(f"{path}: truncated embedding file") from None
    if docs is not None:
        for doc in docs:
            if doc.doc_id not in out:
                raise TokenCountMismatch(doc.doc_id, doc.num_tokens, 0)
            if len(out[doc.doc_id]) != doc.num_tokens:
                raise TokenCountMismatch(doc.doc_id, doc.num_tokens, len(out[doc.doc_id]))
    return out


# -- static tables ----------------------------------------------------------


def static_lookup_encoder(table: Mapping[str, Sequence[float]], dim: int) -> Callable[[Document], EmbeddingMatrix]:
    """Context-free encoder: each token gets its surface's vector.

    Surfaces missing from ``table`` get a zero row flagged as unknown, which
    the model replaces with its shared trainable UNK vector.
    """
    rows = {}
    for word, vec in table.items():
        vec = np.asarray(vec, dtype=np.float32)
        if vec.shape != (dim,):
            raise DimMismatch(word, dim, vec.shape[-1] if vec.ndim else 0)
        rows[word] = vec
    zero = np.zeros(dim, dtype=np.float32)

    def encode(doc: Document) -> EmbeddingMatrix:
        vectors = np.zeros((doc.num_tokens, dim), dtype=np.float32)
        unknown = np.zeros(doc.num_tokens, dtype=bool)
        for t, tok in enumerate(doc.tokens):
            vec = rows.get(tok.surface)
            if vec is None:
                unknown[t] = True
                vec = zero
            vectors[t] = vec
        return EmbeddingMatrix(doc.doc_id, vectors, unknown)

    return encode


def load_text_table(path) -> tuple[dict[str, np.ndarray], int]:
    """Read a GloVe/fastText-style text table (``word v1 ... vd`` per line).

    A leading ``count dim`` header line, as written by fastText, is skipped.
    """
    table: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").rstrip(" ").split(" ")
            if line_no == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            if len(parts) < 2:
                continue
            vec = np.asarray([float(x) for x in parts[1:]], dtype=np.float32)
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise DimMismatch(parts[0], dim, len(vec))
            table[parts[0]] = vec
    if dim is None:
        raise EmbeddingError(f"{path}: empty embedding table")
    return table, dim


def random_table(vocabulary: Iterable[str], dim: int, seed: int) -> dict[str, np.ndarray]:
    """Seeded unit-variance vectors for a vocabulary (used by the synthetic corpus)."""
    rng = np.random.default_rng(seed)
    return {w: rng.standard_normal(dim).astype(np.float32) for w in vocabulary}
