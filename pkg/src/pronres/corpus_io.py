"""Reading and writing coreference-annotated documents.

The on-disk layout is a four-column, tab-separated CoNLL variant::

    #begin document (doc-7)
    0	P3	-	(0
    1	P8	-	0)
    2	w12	-	-
    3	او	Personal	(0)

    #end document

Columns are the token index within its sentence, the surface form, the
pronoun type (``-`` for none), and the coreference chain brackets.  A blank
line closes each sentence.  Chains that occur only once encode gold mentions
that belong to no cluster (singleton pronouns).
"""

from __future__ import annotations

import enum
import io
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .errors import (
    CorpusFormatError,
    InvalidDocument,
    InvalidParam,
    MalformedLine,
    OverlappingSameChainSpan,
    UnbalancedCorefBracket,
)


class PronounType(enum.Enum):
    NONE = "None"
    PERSONAL = "Personal"
    REFLEXIVE = "Reflexive"
    DEMONSTRATIVE = "Demonstrative"

    @property
    def index(self) -> int:
        return _PRONOUN_ORDER.index(self)

    @property
    def tag(self) -> str:
        return "-" if self is PronounType.NONE else self.value

    @classmethod
    def from_tag(cls, tag: str) -> "PronounType":
        if tag == "-":
            return cls.NONE
        for member in cls:
            if member is not cls.NONE and member.value == tag:
                return member
        raise ValueError(f"unknown pronoun tag {tag!r}")


_PRONOUN_ORDER = (
    PronounType.NONE,
    PronounType.PERSONAL,
    PronounType.REFLEXIVE,
    PronounType.DEMONSTRATIVE,
)


class Span(NamedTuple):
    """Inclusive token range ``[start, end]``."""

    start: int
    end: int

    @property
    def width(self) -> int:
        return self.end - self.start + 1

    def __str__(self) -> str:
        return f"({self.start},{self.end})"


@dataclass(frozen=True)
class Token:
    surface: str
    doc_index: int
    sentence_index: int
    pronoun_type: PronounType = PronounType.NONE


@dataclass(frozen=True)
class Document:
    """One annotated document.

    ``gold_mentions`` and every cluster are stored sorted by ``(start, end)``
    and clusters are ordered by their first mention, so two documents with the
    same annotation compare equal regardless of construction order.
    """

    doc_id: str
    tokens: tuple[Token, ...]
    gold_mentions: tuple[Span, ...] = ()
    gold_clusters: tuple[tuple[Span, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        clusters = tuple(
            tuple(sorted(Span(*s) for s in cluster)) for cluster in self.gold_clusters
        )
        clusters = tuple(sorted(clusters, key=lambda c: c[0] if c else (-1, -1)))
        mentions = tuple(sorted(Span(*s) for s in self.gold_mentions))
        object.__setattr__(self, "gold_clusters", clusters)
        object.__setattr__(self, "gold_mentions", mentions)
        self._validate()

    def _validate(self):
        if not self.doc_id or any(c in self.doc_id for c in "\n\r"):
            raise InvalidDocument(f"bad document id {self.doc_id!r}")
        prev_sentence = 0
        for position, tok in enumerate(self.tokens):
            if tok.doc_index != position:
                raise InvalidDocument(f"{self.doc_id}: token {position} has doc_index {tok.doc_index}")
            step = tok.sentence_index - prev_sentence
            if step not in (0, 1) or (position == 0 and tok.sentence_index != 0):
                raise InvalidDocument(f"{self.doc_id}: sentence index jumps at token {position}")
            prev_sentence = tok.sentence_index
            if not tok.surface or any(c in tok.surface for c in "\t\n\r"):
                raise InvalidDocument(f"{self.doc_id}: bad surface at token {position}")
        T = len(self.tokens)
        if len(set(self.gold_mentions)) != len(self.gold_mentions):
            raise InvalidDocument(f"{self.doc_id}: duplicate gold mention")
        for span in self.gold_mentions:
            if not 0 <= span.start <= span.end < T:
                raise InvalidDocument(f"{self.doc_id}: span {span} out of range for T={T}")
        mention_set = set(self.gold_mentions)
        seen: set[Span] = set()
        for cluster in self.gold_clusters:
            if len(cluster) < 2:
                raise InvalidDocument(f"{self.doc_id}: clusters need at least two mentions")
            for span in cluster:
                if span not in mention_set:
                    raise InvalidDocument(f"{self.doc_id}: cluster span {span} missing from gold mentions")
                if span in seen:
                    raise InvalidDocument(f"{self.doc_id}: span {span} in more than one cluster")
                seen.add(span)

    @property
    def num_tokens(self) -> int:
        return len(self.tokens)

    @property
    def num_sentences(self) -> int:
        return self.tokens[-1].sentence_index + 1 if self.tokens else 0

    def sentences(self) -> list[list[Token]]:
        out: list[list[Token]] = []
        for tok in self.tokens:
            if tok.sentence_index == len(out):
                out.append([])
            out[-1].append(tok)
        return out

    def cluster_of(self) -> dict[Span, int]:
        """Map every clustered span to the index of its cluster."""
        return {span: k for k, cluster in enumerate(self.gold_clusters) for span in cluster}

    def pronoun_spans(self) -> list[Span]:
        return [
            Span(t.doc_index, t.doc_index)
            for t in self.tokens
            if t.pronoun_type is not PronounType.NONE
        ]

    def singletons(self) -> list[Span]:
        clustered = set(self.cluster_of())
        return [s for s in self.gold_mentions if s not in clustered]

    @classmethod
    def from_sentences(
        cls,
        doc_id: str,
        sentences: Sequence[Sequence[str | tuple[str, PronounType]]],
        clusters: Iterable[Iterable[tuple[int, int]]] = (),
        singletons: Iterable[tuple[int, int]] = (),
    ) -> "Document":
        """Build a document from per-sentence surfaces (optionally paired with a pronoun type)."""
        tokens = []
        for s_idx, sentence in enumerate(sentences):
            for item in sentence:
                surface, ptype = (item, PronounType.NONE) if isinstance(item, str) else item
                tokens.append(Token(surface, len(tokens), s_idx, ptype))
        clusters = [tuple(Span(*s) for s in c) for c in clusters]
        mentions = [s for c in clusters for s in c] + [Span(*s) for s in singletons]
        return cls(doc_id, tuple(tokens), tuple(mentions), tuple(clusters))


@dataclass(frozen=True)
class CorpusStats:
    document_count: int = 0
    sentence_count: int = 0
    token_count: int = 0

    def __add__(self, other: "CorpusStats") -> "CorpusStats":
        return CorpusStats(
            self.document_count + other.document_count,
            self.sentence_count + other.sentence_count,
            self.token_count + other.token_count,
        )


def corpus_stats(docs: Iterable[Document]) -> CorpusStats:
    total = CorpusStats()
    for doc in docs:
        total = total + CorpusStats(1, doc.num_sentences, doc.num_tokens)
    return total


def format_stats_table(rows: Sequence[tuple[str, CorpusStats]]) -> str:
    """Render corpus statistics as a three-column plain-text table."""
    header = ("", "Document counts", "Sentence counts", "Token counts")
    body = [(name, str(s.document_count), str(s.sentence_count), str(s.token_count)) for name, s in rows]
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(4)]
    lines = []
    for row in [header, *body]:
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


# -- parsing ---------------------------------------------------------------

_BEGIN_RE = re.compile(r"^#begin document \((.+)\)$")
_OPEN_RE = re.compile(r"^\((\d+)$")
_CLOSE_RE = re.compile(r"^(\d+)\)$")
_UNIT_RE = re.compile(r"^\((\d+)\)$")


def _lines(source) -> Iterator[str]:
    if isinstance(source, str):
        source = io.StringIO(source)
    for line in source:
        yield line[:-1] if line.endswith("\n") else line


def _parse_block(doc_id: str, body: list[tuple[int, str]], begin_line: int) -> Document:
    sentences: list[list[tuple[str, PronounType]]] = [[]]
    open_stacks: dict[int, list[tuple[int, int]]] = {}
    chains: dict[int, list[Span]] = {}
    position = 0
    for line_no, line in body:
        if line == "":
            if sentences[-1]:
                sentences.append([])
            continue
        cols = line.split("\t")
        if len(cols) != 4:
            raise MalformedLine(f"expected 4 tab-separated columns, got {len(cols)}", line_no, doc_id)
        index, surface, tag, coref = cols
        if not index.isdigit() or int(index) != len(sentences[-1]):
            raise MalformedLine(f"token index {index!r} out of sequence", line_no, doc_id)
        if not surface:
            raise MalformedLine("empty surface", line_no, doc_id)
        try:
            ptype = PronounType.from_tag(tag)
        except ValueError:
            raise MalformedLine(f"unknown pronoun tag {tag!r}", line_no, doc_id) from None
        if coref != "-":
            for part in coref.split("|"):
                if m := _UNIT_RE.match(part):
                    chains.setdefault(int(m[1]), []).append(Span(position, position))
                elif m := _OPEN_RE.match(part):
                    open_stacks.setdefault(int(m[1]), []).append((position, line_no))
                elif m := _CLOSE_RE.match(part):
                    chain = int(m[1])
                    stack = open_stacks.get(chain)
                    if not stack:
                        raise UnbalancedCorefBracket(doc_id, chain, line_no)
                    start, _ = stack.pop()
                    chains.setdefault(chain, []).append(Span(start, position))
                else:
                    raise MalformedLine(f"bad coreference field {coref!r}", line_no, doc_id)
        sentences[-1].append((surface, ptype))
        position += 1
    for chain, stack in open_stacks.items():
        if stack:
            raise UnbalancedCorefBracket(doc_id, chain, stack[-1][1])
    if not sentences[-1]:
        sentences.pop()

    clusters, singletons = [], []
    span_owner: dict[Span, int] = {}
    for chain in sorted(chains):
        spans = sorted(chains[chain])
        for i, a in enumerate(spans):
            for b in spans[i + 1:]:
                if a == b or a.start < b.start <= a.end < b.end:
                    raise OverlappingSameChainSpan(
                        f"chain {chain} has overlapping spans {a} and {b}", begin_line, doc_id
                    )
        for s in spans:
            if s in span_owner:
                raise CorpusFormatError(f"span {s} appears in chains {span_owner[s]} and {chain}", begin_line, doc_id)
            span_owner[s] = chain
        (clusters if len(spans) > 1 else singletons).append(spans if len(spans) > 1 else spans[0])
    try:
        return Document.from_sentences(doc_id, sentences, clusters, singletons)
    except InvalidDocument as exc:
        raise CorpusFormatError(str(exc), begin_line, doc_id) from None


def parse_conll(source, on_error: Callable[[CorpusFormatError], None] | None = None) -> list[Document]:
    """Parse every document in ``source`` (a string or an iterable of lines).

    By default the first error aborts parsing.  When ``on_error`` is given,
    a broken document is reported through it and skipped instead.
    """
    docs: list[Document] = []
    current: tuple[str, int] | None = None
    body: list[tuple[int, str]] = []
    skipping = False

    def fail(exc: CorpusFormatError):
        if on_error is None:
            raise exc
        on_error(exc)

    for line_no, line in enumerate(_lines(source), start=1):
        if "\r" in line:
            fail(MalformedLine("carriage return in line", line_no, current[0] if current else None))
            skipping = current is not None
            continue
        if line.startswith("#begin document"):
            m = _BEGIN_RE.match(line)
            if m is None or current is not None:
                fail(MalformedLine("unexpected or malformed #begin document", line_no))
                if m is None:
                    continue
            current, body, skipping = (m[1], line_no), [], False
        elif line == "#end document":
            if current is None:
                fail(MalformedLine("#end document without #begin", line_no))
                continue
            if not skipping:
                try:
                    docs.append(_parse_block(current[0], body, current[1]))
                except CorpusFormatError as exc:
                    fail(exc)
            current = None
        elif current is None:
            if line.strip():
                fail(MalformedLine("content outside a document", line_no))
        elif not skipping:
            body.append((line_no, line))
    if current is not None:
        fail(MalformedLine("missing #end document", None, current[0]))
    return docs


def read_conll(path, on_error=None) -> list[Document]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_conll(fh, on_error=on_error)


# -- serialization ---------------------------------------------------------


def _coref_fields(doc: Document) -> list[str]:
    chain_spans = [list(c) for c in doc.gold_clusters] + [[s] for s in doc.singletons()]
    # chain ids follow first-mention order
    chain_spans.sort(key=lambda spans: spans[0])
    opens: list[list[tuple]] = [[] for _ in doc.tokens]
    units: list[list[int]] = [[] for _ in doc.tokens]
    closes: list[list[tuple]] = [[] for _ in doc.tokens]
    for chain, spans in enumerate(chain_spans):
        for s in spans:
            if s.start == s.end:
                units[s.start].append(chain)
            else:
                opens[s.start].append((-s.end, chain))
                closes[s.end].append((-s.start, chain))
    fields = []
    for t in range(len(doc.tokens)):
        parts = [f"({c}" for _, c in sorted(opens[t])]
        parts += [f"({c})" for c in sorted(units[t])]
        parts += [f"{c})" for _, c in sorted(closes[t])]
        fields.append("|".join(parts) if parts else "-")
    return fields


def serialize_conll(docs: Iterable[Document]) -> str:
    out: list[str] = []
    for doc in docs:
        out.append(f"#begin document ({doc.doc_id})\n")
        coref = _coref_fields(doc)
        for sentence in doc.sentences():
            for k, tok in enumerate(sentence):
                out.append(f"{k}\t{tok.surface}\t{tok.pronoun_type.tag}\t{coref[tok.doc_index]}\n")
            out.append("\n")
        out.append("#end document\n")
    return "".join(out)


def write_conll(path, docs: Iterable[Document]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(serialize_conll(docs))


# -- synthetic corpus ------------------------------------------------------

PRONOUN_SURFACES = {
    PronounType.PERSONAL: ("او", "وی"),
    PronounType.REFLEXIVE: ("خودش",),
    PronounType.DEMONSTRATIVE: ("آن", "این"),
}


@dataclass
class _Lexicon:
    persons: list[str]
    objects: list[str]
    fillers: list[str]

    @classmethod
    def build(cls, vocab_size: int) -> "_Lexicon":
        n_named = max(2, vocab_size // 10)
        return cls(
            persons=[f"P{k}" for k in range(n_named)],
            objects=[f"O{k}" for k in range(n_named)],
            fillers=[f"w{k}" for k in range(vocab_size - 2 * n_named)],
        )

    def vocabulary(self) -> list[str]:
        pronouns = [s for surfaces in PRONOUN_SURFACES.values() for s in surfaces]
        return self.persons + self.objects + self.fillers + pronouns


def synthetic_vocabulary(vocab_size: int) -> list[str]:
    """Every surface form the synthetic generator can emit for ``vocab_size``."""
    return _Lexicon.build(vocab_size).vocabulary()


@dataclass
class _DocBuilder:
    sentences: list[list[tuple[str, PronounType]]] = field(default_factory=lambda: [[]])
    chains: dict[str, list[Span]] = field(default_factory=dict)
    pronoun_chain: dict[Span, str] = field(default_factory=dict)
    position: int = 0

    def add(self, surfaces, chain=None, ptype=PronounType.NONE):
        start = self.position
        for s in surfaces:
            self.sentences[-1].append((s, ptype))
            self.position += 1
        if chain is not None:
            span = Span(start, self.position - 1)
            self.chains.setdefault(chain, []).append(span)
            if ptype is not PronounType.NONE:
                self.pronoun_chain[span] = chain

    def new_sentence(self):
        self.sentences.append([])


def generate_synthetic_corpus(
    seed: int,
    n_docs: int,
    vocab_size: int,
    n_sentences: tuple[int, int] = (2, 4),
    sentence_length: tuple[int, int] = (5, 9),
) -> list[Document]:
    """Generate a deterministic toy corpus with one person chain per document.

    Each document introduces a person (one or two name tokens) and possibly an
    object.  Later sentences refer back with personal or reflexive pronouns
    (person chain) and demonstratives (object chain, or an unresolvable
    singleton when no object was introduced).  The gold clusters are the
    ground truth by construction.
    """
    if n_docs < 1:
        raise InvalidParam(f"n_docs must be >= 1, got {n_docs}")
    if vocab_size < 10:
        raise InvalidParam(f"vocab_size must be >= 10, got {vocab_size}")
    lo_s, hi_s = n_sentences
    lo_len, hi_len = sentence_length
    if not 2 <= lo_s <= hi_s or not 3 <= lo_len <= hi_len:
        raise InvalidParam("need n_sentences >= 2 and sentence_length >= 3")
    lex = _Lexicon.build(vocab_size)
    rng = np.random.default_rng(seed)
    pick = lambda seq: seq[int(rng.integers(len(seq)))]  # noqa: E731

    docs = []
    for doc_no in range(n_docs):
        b = _DocBuilder()
        n_sent = int(rng.integers(lo_s, hi_s + 1))
        has_object = bool(rng.random() < 0.5)
        object_word = pick(lex.objects)
        name = [pick(lex.persons)]
        if rng.random() < 0.3:
            name.append(pick([p for p in lex.persons if p != name[0]]))
        object_introduced = False
        for s_idx in range(n_sent):
            if s_idx:
                b.new_sentence()
            target = int(rng.integers(lo_len, hi_len + 1))
            events: list[str] = []
            if s_idx == 0:
                events.append("name")
                if has_object and rng.random() < 0.6:
                    events.append("object")
            else:
                events.append("personal" if s_idx == 1 else pick(["personal", "reflexive", "name", "demonstrative"]))
                if rng.random() < 0.4:
                    events.append(pick(["reflexive", "demonstrative", "object"] if has_object else ["reflexive", "demonstrative"]))
            n_filler = max(0, target - len(events) - (len(name) - 1 if "name" in events else 0))
            # interleave filler before/between/after the events
            slots = sorted(int(x) for x in rng.integers(0, len(events) + 1, size=n_filler))
            k = 0
            for e_idx in range(len(events) + 1):
                while k < len(slots) and slots[k] == e_idx:
                    b.add([pick(lex.fillers)])
                    k += 1
                if e_idx == len(events):
                    break
                event = events[e_idx]
                if event == "name":
                    b.add(name, chain="P")
                elif event == "object":
                    b.add([object_word], chain="O")
                    object_introduced = True
                elif event == "personal":
                    b.add([pick(PRONOUN_SURFACES[PronounType.PERSONAL])], "P", PronounType.PERSONAL)
                elif event == "reflexive":
                    b.add([pick(PRONOUN_SURFACES[PronounType.REFLEXIVE])], "P", PronounType.REFLEXIVE)
                else:
                    chain = "O" if object_introduced else f"S{b.position}"
                    b.add([pick(PRONOUN_SURFACES[PronounType.DEMONSTRATIVE])], chain, PronounType.DEMONSTRATIVE)
        clusters, singletons = [], []
        for chain, spans in b.chains.items():
            if len(spans) > 1:
                clusters.append(spans)
            elif spans[0] in b.pronoun_chain:
                singletons.append(spans[0])
        docs.append(Document.from_sentences(f"synth-{seed}-{doc_no}", b.sentences, clusters, singletons))
    return docs


def split_train_dev(docs: Sequence[Document], seed: int, dev_fraction: float = 0.1):
    """Seeded document-level split; the dev share is floored.

    When the floor is zero (tiny corpora) the dev set is the training set.
    """
    n_dev = int(math.floor(len(docs) * dev_fraction))
    if n_dev == 0:
        return list(docs), list(docs)
    order = np.random.default_rng(seed).permutation(len(docs))
    dev_idx = set(int(i) for i in order[:n_dev])
    train = [d for i, d in enumerate(docs) if i not in dev_idx]
    dev = [d for i, d in enumerate(docs) if i in dev_idx]
    return train, dev
