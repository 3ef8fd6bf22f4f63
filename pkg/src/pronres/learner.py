"""Losses, gradients, and the training loops (detector pretraining and joint)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .config import TrainConfig
from .corpus_io import Document
from .encoder import EmbeddingMatrix
from .errors import Diverged, EmptyCorpus, NonFiniteGradient
from .evaluator import EvalReport, score_links
from .model import ModelParams
from .resolver import predict_corpus, resolve_pronouns
from .scorer import AntecedentTable, score_document

log = logging.getLogger(__name__)

Batch = Sequence[tuple[Document, EmbeddingMatrix]]


# -- scalar losses ------------------------------------------------------------


def detection_loss(labels, scores) -> float:
    """Negated Bernoulli log-likelihood of the mention labels, summed."""
    y = np.asarray(labels, dtype=np.float64)
    s = np.asarray(scores, dtype=np.float64)
    return float(np.sum(np.logaddexp(0.0, s) - y * s))


def antecedent_distribution(scores, mask=None) -> np.ndarray:
    """Softmax over a candidate row (max-subtracted)."""
    s = np.asarray(scores, dtype=np.float64)
    if mask is not None:
        s = np.where(mask, s, -np.inf)
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def clustering_loss(table: AntecedentTable, gold_mask: np.ndarray) -> float:
    """Sum over kept spans of ``-log`` of the probability mass on gold antecedents."""
    if len(table) == 0:
        return 0.0
    mass = np.where(gold_mask, table.probs, 0.0).sum(axis=1)
    return float(-np.log(mass).sum())


# -- batched loss and gradients -------------------------------------------------


def _batch_loss(batch: Batch, params: ModelParams, config: TrainConfig, bound, detect_only=False,
                rng=None, detect_weight=None):
    weight = config.detect_weight if detect_weight is None else detect_weight
    total = ad.Tensor(0.0)
    for doc, emb in batch:
        out = score_document(doc, emb, params, config.scoring, bound=bound, with_loss=True,
                             dropout_rate=config.dropout if rng is not None else 0.0, rng=rng)
        if detect_only:
            total = ad.add(total, out.detection_loss)
        else:
            total = ad.add(total, ad.add(ad.mul(weight, out.detection_loss), out.cluster_loss))
    return total


def total_loss(batch: Batch, params: ModelParams, config: TrainConfig, rng=None) -> float:
    """Weighted detection loss over all spans plus clustering loss over kept spans."""
    return float(_batch_loss(batch, params, config, params.bind(), rng=rng).value)


def gradients(batch: Batch, params: ModelParams, config: TrainConfig, rng=None, detect_only=False,
              detect_weight=None) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and its gradient with respect to every parameter tensor.

    Dropout is active only when ``rng`` is given.
    """
    bound = params.bind(requires_grad=True)
    loss = _batch_loss(batch, params, config, bound, detect_only, rng, detect_weight)
    value = float(loss.value)
    if not math.isfinite(value):
        raise Diverged(f"loss is {value}")
    if loss.requires_grad:
        loss.backward()
    grads = {}
    for name, t in bound.items():
        g = np.zeros(t.shape) if t.grad is None else t.grad
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(name)
        grads[name] = g
    return value, grads


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> tuple[dict[str, np.ndarray], float]:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm <= max_norm:
        return grads, norm
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}, norm


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: ModelParams, grads: dict[str, np.ndarray], names=None) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name in names or params.names():
            g = grads[name]
            m = self.m.get(name, 0.0) * self.beta1 + (1 - self.beta1) * g
            v = self.v.get(name, 0.0) * self.beta2 + (1 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            update = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            params[name] = params[name].astype(np.float64) - update


# -- training -----------------------------------------------------------------

DETECTOR_PARAMS = ("attn.", "mention.", "pronoun.", "unk")


def _check_corpus(batch: Batch):
    if not batch:
        raise EmptyCorpus("no training documents")


def _epoch_order(seed: int, stage: int, epoch: int, n: int) -> np.ndarray:
    return np.random.default_rng([seed, stage, epoch]).permutation(n)


def pretrain_detector(train_set: Batch, config: TrainConfig, params: ModelParams | None = None) -> ModelParams:
    """Fit the mention scorer alone on gold-mention labels for ``pretrain_epochs``."""
    _check_corpus(train_set)
    if params is None:
        params = init_params(train_set, config)
    params = params.copy()
    names = [n for n in params.names() if n.startswith(DETECTOR_PARAMS)]
    opt = Adam(config.learning_rate, config.beta1, config.beta2, config.adam_eps)
    rng = np.random.default_rng([config.seed, 1])
    for epoch in range(config.pretrain_epochs):
        loss_sum = 0.0
        for k in _epoch_order(config.seed, 1, epoch, len(train_set)):
            loss, grads = gradients([train_set[k]], params, config, rng=rng, detect_only=True)
            grads, _ = clip_by_global_norm({n: grads[n] for n in names}, config.clip_norm)
            opt.step(params, grads, names)
            loss_sum += loss
        log.info("pretrain epoch %d detection loss %.6f", epoch + 1, loss_sum)
    return params


def detector_accuracy(batch: Batch, params: ModelParams, config: TrainConfig) -> float:
    """Fraction of candidate spans whose sign of mention score matches the gold label."""
    hits = total = 0
    for doc, emb in batch:
        out = score_document(doc, emb, params, config.scoring)
        gold = set(doc.gold_mentions)
        labels = np.asarray([s in gold for s in out.spans])
        hits += int(np.sum((out.mention_scores > 0) == labels))
        total += len(labels)
    return hits / total if total else 1.0


def init_params(train_set: Batch, config: TrainConfig) -> ModelParams:
    dim = train_set[0][1].dim
    return ModelParams.init(dim, config.hidden, config.feature_dim, seed=config.seed)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev: EvalReport


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    def to_tsv(self) -> str:
        return "".join(
            f"{r.epoch}\t{r.train_loss:.6f}\t{r.dev.precision:.2f}\t{r.dev.recall:.2f}\t{r.dev.f1:.2f}\n"
            for r in self.records
        )


def evaluate(batch: Batch, params: ModelParams, config: TrainConfig, strict_nearest=False, threads=1) -> EvalReport:
    outputs = predict_corpus(batch, params, config.scoring, threads=threads)
    links = {doc.doc_id: resolve_pronouns(doc, result) for doc, _, result in outputs}
    return score_links(links, [doc for doc, _ in batch], strict_nearest=strict_nearest)


def train(
    train_set: Batch,
    dev_set: Batch,
    config: TrainConfig,
    params: ModelParams | None = None,
) -> tuple[ModelParams, TrainLog]:
    """Joint training with Adam, global-norm clipping and early stopping on dev F1.

    Each document is one update.  Returns the parameters from the best dev
    epoch; training stops once dev F1 has not improved for more than
    ``patience`` consecutive epochs.
    """
    _check_corpus(train_set)
    params = (init_params(train_set, config) if params is None else params).copy()
    opt = Adam(config.learning_rate, config.beta1, config.beta2, config.adam_eps)
    rng = np.random.default_rng([config.seed, 2])
    history = TrainLog()
    best, best_f1, waited = params.copy(), -1.0, 0
    for epoch in range(1, config.epochs + 1):
        loss_sum = 0.0
        for k in _epoch_order(config.seed, 2, epoch, len(train_set)):
            loss, grads = gradients([train_set[k]], params, config, rng=rng)
            grads, _ = clip_by_global_norm(grads, config.clip_norm)
            opt.step(params, grads)
            loss_sum += loss
        dev = evaluate(dev_set, params, config) if dev_set else EvalReport(0.0, 0.0, 0.0)
        history.records.append(EpochRecord(epoch, loss_sum, dev))
        log.info("epoch %d loss %.6f dev F1 %.2f", epoch, loss_sum, dev.f1)
        if dev.f1 > best_f1:
            best, best_f1, waited = params.copy(), dev.f1, 0
            history.best_epoch = epoch
        else:
            waited += 1
            if waited > config.patience:
                history.stopped_early = True
                break
    return best, history
