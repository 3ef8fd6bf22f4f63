"""Greedy antecedent decoding and pronoun link extraction."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .corpus_io import Document, Span
from .scorer import AntecedentTable, score_document


@dataclass
class ResolutionResult:
    links: dict[Span, Span | None]
    clusters: list[tuple[Span, ...]]


class _UnionFind:
    def __init__(self):
        self.parent: dict[Span, Span] = {}

    def find(self, x: Span) -> Span:
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: Span, b: Span) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)

    def groups(self) -> list[tuple[Span, ...]]:
        out: dict[Span, list[Span]] = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return sorted(tuple(sorted(g)) for g in out.values())


def best_antecedent(table: AntecedentTable, i: int) -> int | None:
    """Index of span ``i``'s highest-scoring antecedent, or None for the dummy.

    Ties go to the dummy, then to the nearest (latest) candidate.
    """
    real = np.flatnonzero(table.mask[i, 1:])
    if real.size == 0:
        return None
    scores = table.scores[i, 1:][real]
    top = scores.max()
    if top <= table.scores[i, 0]:
        return None
    best = real[scores == top].max()
    return int(table.candidates[i, best])


def decode(table: AntecedentTable) -> ResolutionResult:
    links: dict[Span, Span | None] = {}
    uf = _UnionFind()
    for i, span in enumerate(table.spans):
        j = best_antecedent(table, i)
        links[span] = None if j is None else table.spans[j]
        if j is not None:
            uf.union(span, table.spans[j])
    return ResolutionResult(links, uf.groups())


def resolve_pronouns(doc: Document, result: ResolutionResult) -> dict[Span, Span | None]:
    """Antecedent per pronoun span; pronouns that were pruned map to None."""
    return {span: result.links.get(span) for span in doc.pronoun_spans()}


def predicted_document(doc: Document, result: ResolutionResult) -> Document:
    """The input document re-annotated with the predicted clusters."""
    mentions = [s for c in result.clusters for s in c]
    return Document(doc.doc_id, doc.tokens, tuple(mentions), tuple(result.clusters))


def predict_document(doc: Document, emb, params, settings, bound=None):
    """Score and decode one document; returns ``(DocumentScores, ResolutionResult)``."""
    scores = score_document(doc, emb, params, settings, bound=bound)
    return scores, decode(scores.table)


def predict_corpus(pairs, params, settings, threads: int = 1):
    """``(doc, DocumentScores, ResolutionResult)`` for each ``(doc, embedding)`` pair.

    With ``threads > 1`` documents are scored concurrently; results are
    gathered in input order, so output does not depend on scheduling.
    """
    bound = params.bind()

    def run(pair):
        doc, emb = pair
        scores, result = predict_document(doc, emb, params, settings, bound=bound)
        return doc, scores, result

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(run, pairs))
    else:
        outputs = [run(p) for p in pairs]
    return outputs
