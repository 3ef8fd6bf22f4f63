import io

import pytest
from hypothesis import given, settings, strategies as st

from pronres.corpus_io import (
    CorpusStats,
    Document,
    PronounType,
    Span,
    corpus_stats,
    format_stats_table,
    generate_synthetic_corpus,
    parse_conll,
    serialize_conll,
    split_train_dev,
)
from pronres.errors import (
    CorpusFormatError,
    InvalidDocument,
    InvalidParam,
    MalformedLine,
    OverlappingSameChainSpan,
    UnbalancedCorefBracket,
)


def conll(*rows, doc_id="d"):
    """Build a one-document file; ``None`` rows mark a sentence break."""
    lines = [f"#begin document ({doc_id})"]
    i = 0
    for row in rows:
        if row is None:
            lines.append("")
            i = 0
            continue
        surface, tag, coref = row
        lines.append(f"{i}\t{surface}\t{tag}\t{coref}")
        i += 1
    lines += ["", "#end document"]
    return "\n".join(lines) + "\n"


def test_empty_stream():
    assert parse_conll("") == []
    assert parse_conll(io.StringIO("")) == []


def test_hand_traced_brackets():
    docs = parse_conll(conll(("a", "-", "(1"), ("b", "-", "1)"), ("c", "-", "-"), ("d", "-", "(1)")))
    (doc,) = docs
    assert doc.gold_mentions == (Span(0, 1), Span(3, 3))
    assert doc.gold_clusters == ((Span(0, 1), Span(3, 3)),)


def test_chain_seen_once_is_a_singleton_mention():
    (doc,) = parse_conll(conll(("a", "-", "(1)"), ("او", "Personal", "(2)")))
    assert doc.gold_clusters == ()
    assert doc.singletons() == [Span(0, 0), Span(1, 1)]
    assert doc.tokens[1].pronoun_type is PronounType.PERSONAL


def test_nested_spans_in_different_chains_reparse():
    doc = Document.from_sentences("n", [["a", "b", "c", "d", "e"]], clusters=[[(0, 3), (4, 4)], [(1, 2), (3, 3)]])
    text = serialize_conll([doc])
    fields = [set(line.split("\t")[3].split("|")) for line in text.splitlines() if "\t" in line]
    assert fields == [{"(0"}, {"(1"}, {"1)"}, {"(1)", "0)"}, {"(0)"}]
    assert parse_conll(text) == [doc]


def test_serialize_empty_sequence():
    assert serialize_conll([]) == ""


def test_unbalanced_bracket_names_doc_and_chain():
    with pytest.raises(UnbalancedCorefBracket) as err:
        parse_conll(conll(("a", "-", "(3"), ("b", "-", "-"), doc_id="doc-9"))
    assert "doc-9" in str(err.value) and "3" in str(err.value)
    assert err.value.line_no is not None


def test_stray_close_bracket():
    with pytest.raises(UnbalancedCorefBracket):
        parse_conll(conll(("a", "-", "4)")))


def test_duplicate_same_chain_span_rejected():
    # stack matching always nests, so a repeated span is the overlap the format can express
    with pytest.raises(OverlappingSameChainSpan):
        parse_conll(conll(("a", "-", "(1)|(1)"), ("b", "-", "(1)")))


def test_nested_same_chain_allowed():
    (doc,) = parse_conll(conll(("a", "-", "(1"), ("b", "-", "(1)"), ("c", "-", "1)")))
    assert doc.gold_clusters == ((Span(0, 2), Span(1, 1)),)


@pytest.mark.parametrize(
    "line",
    ["0\ta\t-", "0\ta\tPlural\t-", "x\ta\t-\t-", "0\ta\t-\t(1(", "0\ta\t-\t-\r"],
)
def test_malformed_lines(line):
    text = f"#begin document (d)\n{line}\n\n#end document\n"
    with pytest.raises((MalformedLine, CorpusFormatError)):
        parse_conll(text)


def test_on_error_collects_and_continues():
    bad = conll(("a", "-", "(1"), doc_id="bad")
    good = conll(("a", "-", "-"), doc_id="good")
    seen = []
    docs = parse_conll(bad + good, on_error=seen.append)
    assert [d.doc_id for d in docs] == ["good"]
    assert len(seen) == 1 and isinstance(seen[0], UnbalancedCorefBracket)


def test_document_invariants():
    toks = Document.from_sentences("x", [["a", "b"]]).tokens
    with pytest.raises(InvalidDocument):
        Document("x", toks, (Span(0, 0),), ((Span(0, 0),),))  # one-span cluster
    with pytest.raises(InvalidDocument):
        Document("x", toks, (Span(0, 0), Span(1, 1)), ((Span(0, 0), Span(1, 2)),))
    with pytest.raises(InvalidDocument):
        Document("x", toks, (Span(0, 0),), ((Span(0, 0), Span(1, 1)),))  # cluster span not a mention
    with pytest.raises(InvalidDocument):
        Document("x", (toks[1],))


def test_corpus_stats_examples():
    assert corpus_stats([]) == CorpusStats(0, 0, 0)
    docs = [Document.from_sentences(f"d{k}", [["a", "b", "c", "d", "e"]]) for k in range(2)]
    assert corpus_stats(docs) == CorpusStats(2, 2, 10)


def test_corpus_stats_counts_generator_output():
    docs = generate_synthetic_corpus(3, 43, 50)
    expected = CorpusStats(43, sum(len(d.sentences()) for d in docs), sum(len(d.tokens) for d in docs))
    assert corpus_stats(docs) == expected


def test_corpus_stats_additive():
    a, b = generate_synthetic_corpus(1, 4, 40), generate_synthetic_corpus(2, 3, 40)
    assert corpus_stats(a + b) == corpus_stats(a) + corpus_stats(b)


def test_stats_table_layout():
    text = format_stats_table([("Train", CorpusStats(357, 3000, 150000)), ("Test", CorpusStats(43, 475, 21261))])
    lines = text.splitlines()
    assert lines[0].split("  ")[-1].strip() == "Token counts"
    assert lines[1].split() == ["Train", "357", "3000", "150000"]


def test_generator_is_deterministic():
    assert generate_synthetic_corpus(7, 1, 50) == generate_synthetic_corpus(7, 1, 50)
    assert generate_synthetic_corpus(7, 2, 50) != generate_synthetic_corpus(8, 2, 50)


def test_generator_gives_every_doc_a_resolvable_pronoun():
    for doc in generate_synthetic_corpus(7, 5, 50):
        cluster_of = doc.cluster_of()
        assert any(
            p in cluster_of and any(s < p for s in doc.gold_clusters[cluster_of[p]]) for p in doc.pronoun_spans()
        )


def test_generator_round_trip():
    docs = generate_synthetic_corpus(1, 3, 50)
    assert parse_conll(serialize_conll(docs)) == docs


def test_generator_rejects_bad_params():
    with pytest.raises(InvalidParam):
        generate_synthetic_corpus(0, -1, 50)
    with pytest.raises(InvalidParam):
        generate_synthetic_corpus(0, 2, 3)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6))
def test_round_trip_and_bracket_balance(seed, n):
    docs = generate_synthetic_corpus(seed, n, 40)
    text = serialize_conll(docs)
    assert parse_conll(text) == docs
    for block in text.split("#end document")[:-1]:
        coref = [line.split("\t")[3] for line in block.splitlines() if "\t" in line]
        for field in coref:
            assert field == "-" or all(part for part in field.split("|"))
        joined = "|".join(coref)
        chains = {tok.strip("()") for tok in joined.split("|") if tok != "-"}
        for k in chains:
            opens = sum(p in (f"({k}", f"({k})") for p in joined.split("|"))
            closes = sum(p in (f"{k})", f"({k})") for p in joined.split("|"))
            assert opens == closes


def test_split_train_dev():
    docs = generate_synthetic_corpus(0, 20, 40)
    train, dev = split_train_dev(docs, seed=0)
    assert len(dev) == 2 and len(train) == 18
    assert {d.doc_id for d in train} | {d.doc_id for d in dev} == {d.doc_id for d in docs}
    assert split_train_dev(docs, seed=0) == (train, dev)
    small = docs[:5]
    train, dev = split_train_dev(small, seed=0)
    assert dev == train == list(small)
