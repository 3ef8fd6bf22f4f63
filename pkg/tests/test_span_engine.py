import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pronres.corpus_io import Document, PronounType, Span
from pronres.encoder import EmbeddingMatrix
from pronres.model import ModelParams
from pronres.span_engine import (
    build_representation,
    enumerate_spans,
    head_attention,
    pronoun_feature,
    span_arrays,
)


def attention_oracle(x, p):
    """Straight-line reimplementation: two rectified layers, a projection, then a softmax."""
    weights = []
    for row in x:
        h1 = [max(0.0, sum(row[a] * float(p["attn.W1"][a, k]) for a in range(len(row))) + float(p["attn.b1"][k]))
              for k in range(p.hidden)]
        h2 = [max(0.0, sum(h1[a] * float(p["attn.W2"][a, k]) for a in range(p.hidden)) + float(p["attn.b2"][k]))
              for k in range(p.hidden)]
        weights.append(sum(h2[k] * float(p["attn.w"][k]) for k in range(p.hidden)))
    m = max(weights)
    e = [math.exp(a - m) for a in weights]
    delta = [v / sum(e) for v in e]
    x_hat = [sum(delta[t] * x[t][c] for t in range(len(x))) for c in range(len(x[0]))]
    return np.array(x_hat), np.array(delta)


@pytest.mark.parametrize("T, L, n", [(3, 3, 6), (0, 5, 0), (5, 2, 9)])
def test_enumerate_examples(T, L, n):
    assert len(enumerate_spans(T, L)) == n


@given(st.integers(0, 20), st.integers(1, 20))
def test_enumerate_matches_double_loop(T, L):
    spans = enumerate_spans(T, L)
    brute = [(s, e) for s in range(T) for e in range(T) if s <= e and e - s + 1 <= L]
    assert [tuple(s) for s in spans] == sorted(brute)
    assert len(set(spans)) == len(spans)
    starts, ends = span_arrays(T, L)
    assert list(zip(starts.tolist(), ends.tolist())) == [tuple(s) for s in spans]


def test_head_attention_width_one():
    p = ModelParams.random(3, 5, 2, seed=1)
    x = np.array([[0.3, -1.0, 2.0]])
    x_hat, delta = head_attention(x, p)
    np.testing.assert_array_equal(delta, [1.0])
    np.testing.assert_allclose(x_hat, x[0], rtol=0, atol=1e-15)


def test_head_attention_equal_scores_gives_mean():
    p = ModelParams.random(2, 4, 2, seed=3)
    x = np.array([[1.0, 2.0], [1.0, 2.0]])
    _, delta = head_attention(x, p)
    np.testing.assert_allclose(delta, [0.5, 0.5])
    # distinct tokens but a constant-score network: zero output projection
    p["attn.w"] = np.zeros(4)
    x = np.array([[1.0, 2.0], [3.0, -2.0]])
    x_hat, delta = head_attention(x, p)
    np.testing.assert_allclose(delta, [0.5, 0.5])
    np.testing.assert_allclose(x_hat, [2.0, 0.0])


@pytest.mark.parametrize("seed", range(5))
def test_head_attention_matches_oracle(seed):
    p = ModelParams.random(3, 6, 2, seed=seed)
    x = np.random.default_rng(seed).standard_normal((4, 3))
    x_hat, delta = head_attention(x, p)
    ox, od = attention_oracle(x.tolist(), p)
    np.testing.assert_allclose(delta, od, rtol=0, atol=1e-10)
    np.testing.assert_allclose(x_hat, ox, rtol=0, atol=1e-10)


def _pronoun_doc():
    return Document.from_sentences("p", [["a", ("او", PronounType.PERSONAL), "b", ("خودش", PronounType.REFLEXIVE)]])


def test_pronoun_feature_rows():
    doc = _pronoun_doc()
    table = np.arange(8, dtype=float).reshape(4, 2)
    np.testing.assert_array_equal(pronoun_feature(Span(1, 1), doc, table), table[PronounType.PERSONAL.index])
    np.testing.assert_array_equal(pronoun_feature(Span(3, 3), doc, table), table[PronounType.REFLEXIVE.index])
    np.testing.assert_array_equal(pronoun_feature(Span(0, 2), doc, table), table[PronounType.NONE.index])
    np.testing.assert_array_equal(pronoun_feature(Span(0, 0), doc, table), table[PronounType.NONE.index])


def _hand_model():
    """d=2, h=1, f=1; every attention weight one so alpha_t = max(0, x_t1 + x_t2)."""
    p = ModelParams.init(2, 1, 1, seed=0)
    p["attn.W1"] = [[1.0], [1.0]]
    p["attn.W2"] = [[1.0]]
    p["attn.w"] = [1.0]
    p["pronoun.table"] = [[0.0], [0.25], [0.5], [0.75]]
    return p


def test_hand_computed_representation():
    doc = _pronoun_doc()
    emb = EmbeddingMatrix("p", np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0], [-1.0, 3.0]]))
    p = _hand_model()

    # alpha = (1, 1): equal weights
    rep = build_representation(Span(0, 1), emb, p, doc)
    np.testing.assert_allclose(rep.g, [1, 0, 0, 1, 0.5, 0.5, 0.0], atol=1e-12)

    # alpha = (1, 4, 2) over tokens 1..3
    rep = build_representation(Span(1, 3), emb, p, doc)
    z = math.exp(1) + math.exp(4) + math.exp(2)
    w = np.array([math.exp(1), math.exp(4), math.exp(2)]) / z
    head = w @ np.array([[0.0, 1.0], [2.0, 2.0], [-1.0, 3.0]])
    np.testing.assert_allclose(rep.attention_weights, w, atol=1e-12)
    np.testing.assert_allclose(rep.g, [0, 1, -1, 3, *head, 0.0], atol=1e-12)

    # width-1 pronoun span picks up the Personal row
    rep = build_representation(Span(1, 1), emb, p, doc)
    np.testing.assert_allclose(rep.g, [0, 1, 0, 1, 0, 1, 0.25], atol=1e-12)


def test_representation_shape_and_purity():
    doc = _pronoun_doc()
    emb = EmbeddingMatrix("p", np.random.default_rng(0).standard_normal((4, 3)))
    p = ModelParams.random(3, 5, 4, seed=2)
    a = build_representation(Span(0, 3), emb, p, doc)
    b = build_representation(Span(0, 3), emb, p, doc)
    assert a.g.shape == (3 * 3 + 4,)
    assert a.g.tobytes() == b.g.tobytes()
    one = build_representation(Span(2, 2), emb, p, doc)
    np.testing.assert_array_equal(one.g[:3], one.g[3:6])
    np.testing.assert_allclose(one.g[6:9], one.g[:3], atol=1e-15)


def test_unknown_rows_use_unk_vector():
    doc = _pronoun_doc()
    emb = EmbeddingMatrix("p", np.zeros((4, 2)), unknown=[True, False, False, False])
    p = _hand_model()
    p["unk"] = [7.0, -7.0]
    rep = build_representation(Span(0, 0), emb, p, doc)
    np.testing.assert_allclose(rep.g[:2], [7.0, -7.0])
