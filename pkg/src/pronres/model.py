"""Learnable parameters and the feed-forward building block."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

N_PRONOUN_TYPES = 4
FFNN_PREFIXES = ("attn", "mention", "antecedent")


def _glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in = shape[0]
    fan_out = shape[1] if len(shape) > 1 else 1
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class ModelParams:
    """All trainable tensors, keyed by dotted name.

    Values are kept as float32 arrays so a checkpoint round-trip is exact;
    the forward pass promotes them to float64.
    """

    tensors: dict[str, np.ndarray]

    @classmethod
    def init(
        cls,
        dim: int,
        hidden: int = 1200,
        feature_dim: int = 20,
        seed: int = 0,
        zero_output: bool = True,
    ) -> "ModelParams":
        """Glorot-uniform weights, zero biases.

        With ``zero_output`` the mention and antecedent projections, the
        coarse bilinear matrix and the UNK vector start at zero.
        """
        rng = np.random.default_rng(seed)
        span_dim = 3 * dim + feature_dim
        t: dict[str, np.ndarray] = {}
        for prefix, in_dim in (("attn", dim), ("mention", span_dim), ("antecedent", 3 * span_dim)):
            t[f"{prefix}.W1"] = _glorot(rng, (in_dim, hidden))
            t[f"{prefix}.b1"] = np.zeros(hidden)
            t[f"{prefix}.W2"] = _glorot(rng, (hidden, hidden))
            t[f"{prefix}.b2"] = np.zeros(hidden)
        t["attn.w"] = _glorot(rng, (hidden,))
        t["mention.U"] = _glorot(rng, (hidden,))
        t["antecedent.U"] = _glorot(rng, (hidden,))
        t["coarse.W"] = _glorot(rng, (span_dim, span_dim))
        t["refine.W"] = _glorot(rng, (2 * span_dim, span_dim))
        t["refine.b"] = np.zeros(span_dim)
        t["pronoun.table"] = _glorot(rng, (N_PRONOUN_TYPES, feature_dim))
        t["unk"] = rng.uniform(-0.1, 0.1, size=dim)
        if zero_output:
            for name in ("mention.U", "antecedent.U", "coarse.W", "unk"):
                t[name] = np.zeros_like(t[name])
        return cls({k: v.astype(np.float32) for k, v in t.items()})

    @classmethod
    def random(cls, dim: int, hidden: int, feature_dim: int, seed: int = 0, scale: float = 0.5) -> "ModelParams":
        """Every tensor, biases included, drawn uniformly from ``[-scale, scale]``.

        A generic point for derivative checks: no pre-activation sits exactly
        on a rectifier kink.
        """
        shapes = {k: v.shape for k, v in cls.init(dim, hidden, feature_dim).tensors.items()}
        rng = np.random.default_rng(seed)
        return cls({k: rng.uniform(-scale, scale, size=shape).astype(np.float32) for k, shape in shapes.items()})

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __setitem__(self, name: str, value) -> None:
        self.tensors[name] = np.asarray(value, dtype=np.float32)

    def names(self) -> list[str]:
        return sorted(self.tensors)

    @property
    def dim(self) -> int:
        return self.tensors["attn.W1"].shape[0]

    @property
    def hidden(self) -> int:
        return self.tensors["attn.W1"].shape[1]

    @property
    def feature_dim(self) -> int:
        return self.tensors["pronoun.table"].shape[1]

    @property
    def span_dim(self) -> int:
        return 3 * self.dim + self.feature_dim

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.tensors.items()})

    def __eq__(self, other):
        if not isinstance(other, ModelParams) or self.names() != other.names():
            return False
        return all(
            self.tensors[k].shape == other.tensors[k].shape
            and self.tensors[k].tobytes() == other.tensors[k].tobytes()
            for k in self.names()
        )

    def bind(self, requires_grad: bool = False) -> dict[str, ad.Tensor]:
        """Wrap every tensor for a forward pass (float64)."""
        return {
            k: ad.Tensor(v.astype(np.float64), requires_grad=requires_grad, name=k)
            for k, v in self.tensors.items()
        }


def ffnn(x, bound: dict[str, ad.Tensor], prefix: str, dropout_rate: float = 0.0, rng=None) -> ad.Tensor:
    """Two rectified hidden layers; dropout after each when ``rng`` is given."""
    h = ad.relu(ad.linear(x, bound[f"{prefix}.W1"], bound[f"{prefix}.b1"]))
    h = ad.dropout(h, dropout_rate, rng)
    h = ad.relu(ad.linear(h, bound[f"{prefix}.W2"], bound[f"{prefix}.b2"]))
    return ad.dropout(h, dropout_rate, rng)
