"""Candidate spans and their vector representations.

A span's representation is the concatenation of its first-token vector, its
last-token vector, an attention-weighted "soft head" over its tokens, and a
learned pronoun-category feature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .corpus_io import Document, PronounType, Span
from .encoder import EmbeddingMatrix
from .model import ModelParams, ffnn


@dataclass
class SpanRepresentation:
    span: Span
    g: np.ndarray
    attention_weights: np.ndarray


def enumerate_spans(T: int, L: int) -> list[Span]:
    """All spans of width at most ``L``, ordered by ``(start, end)``."""
    return [Span(s, e) for s in range(T) for e in range(s, min(s + L, T))]


def span_arrays(T: int, L: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`enumerate_spans`: parallel start and end arrays."""
    starts, ends = [], []
    for s in range(T):
        width = min(L, T - s)
        starts.extend([s] * width)
        ends.extend(range(s, s + width))
    return np.asarray(starts, dtype=np.intp), np.asarray(ends, dtype=np.intp)


def pronoun_type_indices(doc: Document, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Category row per span: only width-1 spans over a pronoun token get a pronoun row."""
    token_types = np.asarray([t.pronoun_type.index for t in doc.tokens], dtype=np.intp)
    out = np.zeros(len(starts), dtype=np.intp)
    single = starts == ends
    out[single] = token_types[starts[single]]
    return out


def token_matrix(emb: EmbeddingMatrix, bound: dict[str, ad.Tensor]) -> ad.Tensor:
    """Token vectors with flagged unknown rows replaced by the UNK parameter."""
    X = emb.vectors.astype(np.float64)
    if emb.unknown is None or not emb.unknown.any():
        return ad.Tensor(X)
    mask = emb.unknown.astype(np.float64)[:, None]
    return ad.add(ad.Tensor(X * (1.0 - mask)), ad.mul(mask, bound["unk"]))


def span_representations(
    X: ad.Tensor,
    starts: np.ndarray,
    ends: np.ndarray,
    ptype_idx: np.ndarray,
    bound: dict[str, ad.Tensor],
    dropout_rate: float = 0.0,
    rng=None,
) -> tuple[ad.Tensor, np.ndarray]:
    """Representations for many spans at once.

    Returns the ``(N, 3d+f)`` matrix and the ``(N, max_width)`` attention
    weights (zero beyond each span's end).
    """
    widths = ends - starts + 1
    max_w = int(widths.max())
    offsets = np.arange(max_w)
    mask = offsets[None, :] < widths[:, None]
    index = np.where(mask, starts[:, None] + offsets[None, :], starts[:, None])

    alpha = ad.linear(ffnn(X, bound, "attn", dropout_rate, rng), bound["attn.w"])
    delta = ad.masked_softmax(ad.take(alpha, index), mask, axis=1)
    head = ad.reduce_sum(ad.mul(ad.expand_dims(delta, -1), ad.take(X, index)), axis=1)
    phi = ad.take(bound["pronoun.table"], ptype_idx)
    G = ad.concat([ad.take(X, starts), ad.take(X, ends), head, phi], axis=-1)
    return G, delta.value


def head_attention(x, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Soft head of one span's token vectors ``x`` (shape ``(width, d)``).

    Returns ``(x_hat, weights)``.
    """
    x = np.asarray(x, dtype=np.float64)
    bound = params.bind()
    alpha = ad.linear(ffnn(x, bound, "attn"), bound["attn.w"]).value
    e = np.exp(alpha - alpha.max())
    delta = e / e.sum()
    return delta @ x, delta


def pronoun_feature(span: Span, doc: Document, table) -> np.ndarray:
    """Row of the pronoun-feature table that applies to ``span``."""
    table = table["pronoun.table"] if isinstance(table, ModelParams) else np.asarray(table)
    ptype = PronounType.NONE
    if span.start == span.end:
        ptype = doc.tokens[span.start].pronoun_type
    return np.asarray(table[ptype.index], dtype=np.float64)


def build_representation(span: Span, embeddings: EmbeddingMatrix, params: ModelParams, doc: Document) -> SpanRepresentation:
    bound = params.bind()
    X = token_matrix(embeddings, bound)
    starts = np.asarray([span.start], dtype=np.intp)
    ends = np.asarray([span.end], dtype=np.intp)
    G, delta = span_representations(X, starts, ends, pronoun_type_indices(doc, starts, ends), bound)
    return SpanRepresentation(span, G.value[0], delta[0, : span.width])
