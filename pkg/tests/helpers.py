"""Shared fixtures: small synthetic batches and a kink-aware finite-difference check."""

from __future__ import annotations

import contextlib
import hashlib
from dataclasses import dataclass

import numpy as np

import pronres.autodiff as ad
import pronres.scorer as scorer_mod
from pronres.corpus_io import generate_synthetic_corpus, synthetic_vocabulary
from pronres.encoder import random_table, static_lookup_encoder
from pronres.learner import gradients, total_loss
from pronres.model import ModelParams


def synthetic_batch(seed, n_docs, dim, vocab_size=30, n_sentences=(2, 2), sentence_length=(4, 5)):
    docs = generate_synthetic_corpus(seed, n_docs, vocab_size, n_sentences=n_sentences,
                                     sentence_length=sentence_length)
    encode = static_lookup_encoder(random_table(synthetic_vocabulary(vocab_size), dim, seed), dim)
    return [(d, encode(d)) for d in docs]


@contextlib.contextmanager
def recording_decisions(monkeypatch):
    """Record every rectifier activation pattern and pruning choice made inside the block.

    Yields a list; each forward pass appends to it, and ``signature`` of the
    list identifies the piecewise-smooth region the loss was evaluated in.
    """
    log: list[bytes] = []
    relu, prune, coarse = ad.relu, scorer_mod.prune_top_spans, scorer_mod.coarse_prune

    def relu_rec(x):
        log.append(np.packbits(x.value > 0).tobytes())
        return relu(x)

    def prune_rec(*args, **kwargs):
        out = prune(*args, **kwargs)
        log.append(np.asarray(out.indices).tobytes())
        return out

    def coarse_rec(*args, **kwargs):
        out = coarse(*args, **kwargs)
        log.append(repr(out).encode())
        return out

    with monkeypatch.context() as m:
        m.setattr(ad, "relu", relu_rec)
        m.setattr(scorer_mod, "prune_top_spans", prune_rec)
        m.setattr(scorer_mod, "coarse_prune", coarse_rec)
        yield log


def signature(log) -> str:
    h = hashlib.sha1()
    for item in log:
        h.update(item)
    return h.hexdigest()


@dataclass
class GradCheck:
    checked: int
    excluded: int
    worst: float
    failures: list
    # excluded stencils whose difference quotient would also have missed the tolerance
    kink_misses: int = 0

    @property
    def excluded_fraction(self) -> float:
        total = self.checked + self.excluded
        return self.excluded / total if total else 0.0


def finite_difference_check(batch, params: ModelParams, config, monkeypatch=None, step=1e-4,
                            threshold=1e-6, tol=1e-4) -> GradCheck:
    """Compare analytic gradients with central differences, coordinate by coordinate.

    With ``monkeypatch`` given, coordinates whose ``+step`` or ``-step``
    evaluation lands in a different activation/pruning region than the
    centre are set aside as ``excluded``: the loss is not differentiable
    across that stencil.  Without it every coordinate is checked.
    """
    _, grads = gradients(batch, params, config)
    base = {k: v.astype(np.float64) for k, v in params.tensors.items()}

    def loss_at(tensors):
        q = ModelParams(tensors)  # float64 values bypass the float32 setter on purpose
        if monkeypatch is None:
            return total_loss(batch, q, config), None
        with recording_decisions(monkeypatch) as log:
            value = total_loss(batch, q, config)
        return value, signature(log)

    _, centre = loss_at(base)
    checked = excluded = kink_misses = 0
    worst = 0.0
    failures = []
    for name in params.names():
        for idx in np.ndindex(base[name].shape):
            g = grads[name][idx]
            if abs(g) <= threshold:
                continue
            probe = dict(base)
            probe[name] = base[name].copy()
            probe[name][idx] += step
            lp, sp = loss_at(probe)
            probe[name][idx] -= 2 * step
            lm, sm = loss_at(probe)
            fd = (lp - lm) / (2 * step)
            rel = abs(fd - g) / max(abs(fd), abs(g))
            if monkeypatch is not None and (sp != centre or sm != centre):
                excluded += 1
                kink_misses += rel > tol
                continue
            checked += 1
            worst = max(worst, rel)
            if rel > tol:
                failures.append((name, idx, g, fd, rel))
    return GradCheck(checked, excluded, worst, failures, kink_misses)


# criterion id -> (passed, detail); filled by the acceptance module, printed by conftest
ACCEPTANCE: dict[int, tuple[bool, str]] = {}
