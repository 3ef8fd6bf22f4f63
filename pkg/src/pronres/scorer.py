"""Mention and antecedent scoring, span pruning, and the per-document forward pass."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .corpus_io import Document, Span
from .encoder import EmbeddingMatrix
from .errors import InvalidParam, OrderViolation
from .model import ModelParams, ffnn
from .span_engine import pronoun_type_indices, span_arrays, span_representations, token_matrix


@dataclass(frozen=True)
class ScoringSettings:
    max_span_width: int = 10
    top_span_ratio: float = 0.4
    max_antecedents: int | None = 50
    refine_rounds: int = 1

    def __post_init__(self):
        if self.max_span_width < 1:
            raise InvalidParam("max_span_width must be >= 1")
        if not 0.0 < self.top_span_ratio <= 1.0:
            raise InvalidParam("top_span_ratio must lie in (0, 1]")
        if self.max_antecedents is not None and self.max_antecedents < 1:
            raise InvalidParam("max_antecedents must be >= 1 (or None for no cap)")
        if self.refine_rounds < 0:
            raise InvalidParam("refine_rounds must be >= 0")


@dataclass
class PrunedSpans:
    kept: list[tuple[Span, float]]
    indices: np.ndarray
    discarded: int


@dataclass
class AntecedentTable:
    """Antecedent candidates and scores for the kept spans of one document.

    Column 0 of ``scores``/``probs`` is the dummy antecedent; column ``c + 1``
    is ``candidates[i, c]`` (an index into ``spans``) where ``mask[i, c + 1]``.
    """

    spans: list[Span]
    mention_scores: np.ndarray
    candidates: np.ndarray
    mask: np.ndarray
    scores: np.ndarray
    probs: np.ndarray

    def __len__(self):
        return len(self.spans)

    def row(self, i: int) -> list[tuple[Span | None, float, float]]:
        """``(antecedent or None, score, probability)`` for every candidate of span ``i``."""
        out = [(None, float(self.scores[i, 0]), float(self.probs[i, 0]))]
        for c in range(self.candidates.shape[1]):
            if self.mask[i, c + 1]:
                j = int(self.candidates[i, c])
                out.append((self.spans[j], float(self.scores[i, c + 1]), float(self.probs[i, c + 1])))
        return out


@dataclass
class DocumentScores:
    """Everything one forward pass produces for a document."""

    doc: Document
    spans: list[Span]
    mention_scores: np.ndarray
    pruned: PrunedSpans
    table: AntecedentTable
    attention: np.ndarray
    detection_loss: ad.Tensor | None = None
    cluster_loss: ad.Tensor | None = None
    extras: dict = field(default_factory=dict)


# -- scalar scoring functions -------------------------------------------------


def mention_score(g, params: ModelParams) -> float:
    bound = params.bind()
    return float(ad.linear(ffnn(np.asarray(g, dtype=np.float64), bound, "mention"), bound["mention.U"]).value)


def antecedent_score(g_i, g_j, params: ModelParams) -> float:
    g_i = np.asarray(g_i, dtype=np.float64)
    g_j = np.asarray(g_j, dtype=np.float64)
    bound = params.bind()
    pair = np.concatenate([g_i, g_j, g_i * g_j])
    return float(ad.linear(ffnn(pair, bound, "antecedent"), bound["antecedent.U"]).value)


def pairwise_score(i: int, j: int | None, mention_scores, antecedent_scores) -> float:
    """Total link score of span ``i`` to ``j`` (``None`` is the dummy antecedent).

    ``antecedent_scores[i][j]`` holds the pair score; spans are indexed in
    document order so ``j`` must be smaller than ``i``.
    """
    if j is None:
        return 0.0
    if not j < i:
        raise OrderViolation(f"antecedent {j} does not precede span {i}")
    return float(mention_scores[i]) + float(mention_scores[j]) + float(antecedent_scores[i][j])


# -- pruning --------------------------------------------------------------------


def num_kept(N: int, ratio: float) -> int:
    if N == 0:
        return 0
    # guard against 0.1 * 30 = 3.0000000000000004
    return min(N, max(1, math.ceil(ratio * N - 1e-9)))


def _rank(scores: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Indices sorted best-first; ties go to the earlier start, then the shorter span."""
    return np.lexsort((ends - starts, starts, -scores))


def prune_top_spans(spans, scores, ratio: float) -> PrunedSpans:
    """Keep the ``ceil(ratio * N)`` best-scoring spans, returned in document order."""
    if not 0.0 < ratio <= 1.0:
        raise InvalidParam(f"top span ratio must lie in (0, 1], got {ratio}")
    scores = np.asarray(scores, dtype=np.float64)
    N = len(spans)
    K = num_kept(N, ratio)
    if N == 0:
        return PrunedSpans([], np.zeros(0, dtype=np.intp), 0)
    starts = np.asarray([s[0] for s in spans])
    ends = np.asarray([s[1] for s in spans])
    chosen = _rank(scores, starts, ends)[:K]
    chosen = chosen[np.lexsort((ends[chosen], starts[chosen]))]
    kept = [(Span(int(starts[k]), int(ends[k])), float(scores[k])) for k in chosen]
    return PrunedSpans(kept, chosen.astype(np.intp), N - K)


def coarse_scores(g: np.ndarray, mention_scores: np.ndarray, W_c: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    s = np.asarray(mention_scores, dtype=np.float64)
    return g @ np.asarray(W_c, dtype=np.float64) @ g.T + s[:, None] + s[None, :]


def coarse_prune(spans: list[Span], g, W_c, mention_scores, C: int | None) -> list[list[int | None]]:
    """Top-``C`` preceding spans by bilinear coarse score, plus the dummy (``None``).

    Real candidates are listed in document order, the dummy last.
    """
    if C is not None and C < 1:
        raise InvalidParam("C must be >= 1")
    K = len(spans)
    if K == 0:
        return []
    S = coarse_scores(g, mention_scores, W_c)
    starts = np.asarray([s.start for s in spans])
    ends = np.asarray([s.end for s in spans])
    out: list[list[int | None]] = []
    for i in range(K):
        if C is None or i <= C:
            chosen = list(range(i))
        else:
            order = _rank(S[i, :i], starts[:i], ends[:i])[:C]
            chosen = sorted(int(j) for j in order)
        out.append(chosen + [None])
    return out


def _candidate_matrix(lists: list[list[int | None]]) -> tuple[np.ndarray, np.ndarray]:
    K = len(lists)
    width = max((len(c) - 1 for c in lists), default=0)
    cand = np.zeros((K, width), dtype=np.intp)
    mask = np.zeros((K, width + 1), dtype=bool)
    mask[:, 0] = True
    for i, c in enumerate(lists):
        real = [j for j in c if j is not None]
        cand[i, : len(real)] = real
        mask[i, 1 : len(real) + 1] = True
    return cand, mask


# -- batched scoring used by the forward pass -----------------------------------


def _pair_scores(Gk: ad.Tensor, smk: ad.Tensor, cand: np.ndarray, bound, rate, rng) -> ad.Tensor:
    """Full score table ``(K, 1 + width)`` with the dummy column fixed at zero."""
    K, width = cand.shape
    zeros = ad.Tensor(np.zeros((K, 1)))
    if width == 0:
        return zeros
    gj = ad.take(Gk, cand)
    gi = ad.broadcast_to(ad.expand_dims(Gk, 1), gj.shape)
    pair = ad.concat([gi, gj, ad.mul(gi, gj)], axis=-1)
    s_a = ad.linear(ffnn(pair, bound, "antecedent", rate, rng), bound["antecedent.U"])
    s = ad.add(ad.add(ad.expand_dims(smk, 1), ad.take(smk, cand)), s_a)
    return ad.concat([zeros, s], axis=1)


def _refine_step(Gk: ad.Tensor, probs: ad.Tensor, cand: np.ndarray, bound) -> ad.Tensor:
    """Gate each span towards its expected antecedent representation.

    The dummy antecedent contributes the span's own vector.
    """
    own = ad.expand_dims(Gk, 1)
    cand_g = own if cand.shape[1] == 0 else ad.concat([own, ad.take(Gk, cand)], axis=1)
    expected = ad.reduce_sum(ad.mul(ad.expand_dims(probs, -1), cand_g), axis=1)
    gate = ad.sigmoid(ad.linear(ad.concat([Gk, expected], axis=-1), bound["refine.W"], bound["refine.b"]))
    return ad.add(ad.mul(gate, Gk), ad.mul(ad.add(1.0, ad.neg(gate)), expected))


def refine_representations(g, table: AntecedentTable, params: ModelParams, rounds: int) -> np.ndarray:
    """Apply ``rounds`` gated refinement steps to the kept-span vectors ``g``.

    Each round after the first re-scores the candidates with the refined
    vectors (mention scores stay fixed) before the next update.
    """
    if rounds < 0:
        raise InvalidParam("rounds must be >= 0")
    bound = params.bind()
    Gk = ad.Tensor(np.asarray(g, dtype=np.float64))
    smk = ad.Tensor(table.mention_scores)
    probs = ad.Tensor(table.probs)
    for r in range(rounds):
        if r:
            probs = ad.masked_softmax(_pair_scores(Gk, smk, table.candidates, bound, 0.0, None), table.mask)
        Gk = _refine_step(Gk, probs, table.candidates, bound)
    return Gk.value


def gold_antecedent_mask(doc: Document, spans: list[Span], cand: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Which table entries are gold antecedents; the dummy when a row has none."""
    cluster = doc.cluster_of()
    ids = np.asarray([cluster.get(s, -1) for s in spans], dtype=np.intp)
    gold = np.zeros_like(mask)
    if cand.shape[1]:
        same = (ids[:, None] >= 0) & (ids[cand] == ids[:, None])
        gold[:, 1:] = same & mask[:, 1:]
    gold[:, 0] = ~gold[:, 1:].any(axis=1)
    return gold


def score_document(
    doc: Document,
    emb: EmbeddingMatrix,
    params: ModelParams,
    settings: ScoringSettings = ScoringSettings(),
    bound: dict[str, ad.Tensor] | None = None,
    with_loss: bool = False,
    dropout_rate: float = 0.0,
    rng: np.random.Generator | None = None,
) -> DocumentScores:
    """Forward pass over one document.

    Pass ``bound`` (from :meth:`ModelParams.bind` with gradients on) to
    backpropagate through the returned loss tensors.
    """
    if bound is None:
        bound = params.bind()
    T = doc.num_tokens
    starts, ends = span_arrays(T, settings.max_span_width)
    N = len(starts)
    spans = [Span(int(s), int(e)) for s, e in zip(starts, ends)]
    if N == 0:
        empty = AntecedentTable([], np.zeros(0), np.zeros((0, 0), np.intp), np.zeros((0, 1), bool),
                                np.zeros((0, 1)), np.zeros((0, 1)))
        zero = ad.Tensor(0.0)
        return DocumentScores(doc, [], np.zeros(0), PrunedSpans([], np.zeros(0, np.intp), 0), empty,
                              np.zeros((0, 0)), zero if with_loss else None, zero if with_loss else None)

    X = token_matrix(emb, bound)
    G, attention = span_representations(
        X, starts, ends, pronoun_type_indices(doc, starts, ends), bound, dropout_rate, rng
    )
    s_m = ad.linear(ffnn(G, bound, "mention", dropout_rate, rng), bound["mention.U"])

    pruned = prune_top_spans(spans, s_m.value, settings.top_span_ratio)
    kept_spans = [s for s, _ in pruned.kept]
    Gk = ad.take(G, pruned.indices)
    smk = ad.take(s_m, pruned.indices)
    lists = coarse_prune(kept_spans, Gk.value, bound["coarse.W"].value, smk.value, settings.max_antecedents)
    cand, mask = _candidate_matrix(lists)

    full = _pair_scores(Gk, smk, cand, bound, dropout_rate, rng)
    for _ in range(settings.refine_rounds):
        probs = ad.masked_softmax(full, mask)
        Gk = _refine_step(Gk, probs, cand, bound)
        full = _pair_scores(Gk, smk, cand, bound, dropout_rate, rng)
    probs = ad.masked_softmax(full, mask)

    table = AntecedentTable(kept_spans, smk.value.copy(), cand, mask,
                            np.where(mask, full.value, -np.inf), probs.value)
    result = DocumentScores(doc, spans, s_m.value, pruned, table, attention)
    if with_loss:
        gold_set = set(doc.gold_mentions)
        labels = np.asarray([s in gold_set for s in spans], dtype=np.float64)
        # -(y log sigmoid(s) + (1 - y) log(1 - sigmoid(s))) == softplus(s) - y s
        result.detection_loss = ad.reduce_sum(ad.add(ad.softplus(s_m), ad.neg(ad.mul(labels, s_m))))
        gold = gold_antecedent_mask(doc, kept_spans, cand, mask)
        marginal = ad.add(ad.masked_logsumexp(full, mask), ad.neg(ad.masked_logsumexp(full, gold)))
        result.cluster_loss = ad.reduce_sum(marginal)
        result.extras["gold_mask"] = gold
    return result
