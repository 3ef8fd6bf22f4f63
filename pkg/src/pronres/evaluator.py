"""Precision, recall and F1 over predicted pronoun links."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus_io import Document, Span
from .errors import SpanOutOfRange


def f1_score(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class EvalReport:
    """Scores in percent plus the counts they came from."""

    precision: float
    recall: float
    f1: float
    attempted: int = 0
    correct: int = 0
    resolvable: int = 0

    @classmethod
    def from_counts(cls, attempted: int, correct: int, resolvable: int) -> "EvalReport":
        p = 100.0 * correct / attempted if attempted else 0.0
        r = 100.0 * correct / resolvable if resolvable else 0.0
        return cls(p, r, f1_score(p, r), attempted, correct, resolvable)


def _check(doc: Document, span: Span) -> None:
    if not 0 <= span.start <= span.end < doc.num_tokens:
        raise SpanOutOfRange(f"{doc.doc_id}: span {span} outside [0, {doc.num_tokens})")


def _nearest_gold_antecedent(doc: Document, pronoun: Span, cluster_of: dict) -> Span | None:
    k = cluster_of.get(pronoun)
    if k is None:
        return None
    earlier = [s for s in doc.gold_clusters[k] if s < pronoun]
    return earlier[-1] if earlier else None


def score_links(
    predicted: Mapping[str, Mapping[Span, Span | None]],
    gold_docs: Iterable[Document],
    strict_nearest: bool = False,
) -> EvalReport:
    """Score ``doc_id -> {pronoun: antecedent or None}`` against gold clusters.

    A link is correct when both spans belong to the same gold cluster (or,
    with ``strict_nearest``, when the antecedent is the pronoun's closest
    preceding gold cluster member).  Recall counts every gold pronoun with an
    earlier member in its cluster; singleton pronouns are left out.
    """
    attempted = correct = resolvable = 0
    for doc in gold_docs:
        cluster_of = doc.cluster_of()
        links = predicted.get(doc.doc_id, {})
        for pronoun, ante in links.items():
            _check(doc, pronoun)
            if ante is not None:
                _check(doc, ante)
        for pronoun in doc.pronoun_spans():
            nearest = _nearest_gold_antecedent(doc, pronoun, cluster_of)
            if nearest is not None:
                resolvable += 1
            ante = links.get(pronoun)
            if ante is None:
                continue
            attempted += 1
            if strict_nearest:
                correct += ante == nearest
            else:
                k = cluster_of.get(pronoun)
                correct += k is not None and cluster_of.get(ante) == k and ante < pronoun
    return EvalReport.from_counts(attempted, correct, resolvable)


def report_table(rows: Sequence[tuple[str, EvalReport]] | Mapping[str, EvalReport]) -> str:
    """Fixed-width Model/Precision/Recall/F1 table, two decimals."""
    items = list(rows.items()) if isinstance(rows, Mapping) else list(rows)
    name_w = max([len("Model")] + [len(name) for name, _ in items])
    lines = [f"{'Model':<{name_w}}  {'Precision':>9}  {'Recall':>9}  {'F1':>9}"]
    for name, r in items:
        lines.append(f"{name:<{name_w}}  {r.precision:>9.2f}  {r.recall:>9.2f}  {r.f1:>9.2f}")
    return "\n".join(lines) + "\n"


def report_tsv(rows: Sequence[tuple[str, EvalReport]]) -> str:
    lines = ["model\tprecision\trecall\tf1\tattempted\tcorrect\tresolvable"]
    for name, r in rows:
        lines.append(f"{name}\t{r.precision:.2f}\t{r.recall:.2f}\t{r.f1:.2f}\t{r.attempted}\t{r.correct}\t{r.resolvable}")
    return "\n".join(lines) + "\n"
