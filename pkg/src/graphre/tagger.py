"""Word tagger: single-layer BiLSTM + linear classifier, and the tag embedder."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError
from .numerics import ops
from .numerics.nn import BiLSTM, Linear, Module
from .numerics.tensor import Tensor


@dataclass(frozen=True)
class TaggerConfig:
    d_f: int
    n_tags: int
    d_h: int = 300
    d_tag: int = 100

    def __post_init__(self):
        if min(self.d_f, self.n_tags, self.d_h, self.d_tag) <= 0:
            raise ConfigError(f"tagger dimensions must be positive: {self}")


class TaggerOutput(NamedTuple):
    hidden: Tensor  # (|V|, 2 d_h)
    logits: Tensor  # (|V|, |T|)
    probs: Tensor  # (|V|, |T|), rows sum to 1


class Tagger(Module):
    def __init__(self, cfg: TaggerConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.lstm = BiLSTM(cfg.d_f, cfg.d_h, 1, rng)
        self.classifier = Linear(2 * cfg.d_h, cfg.n_tags, rng)

    def __call__(self, x: Tensor) -> TaggerOutput:
        if x.ndim != 2 or x.shape[1] != self.cfg.d_f:
            raise ConfigError(f"tagger expects (|V|, {self.cfg.d_f}) features, got {x.shape}")
        hidden = self.lstm(x)
        logits = self.classifier(hidden)
        return TaggerOutput(hidden, logits, ops.softmax(logits))


class TagEmbedder(Module):
    """argmax -> one-hot -> affine map. No gradient reaches the tag scores."""

    def __init__(self, n_tags: int, d_tag: int, rng: np.random.Generator):
        self.n_tags = n_tags
        self.proj = Linear(n_tags, d_tag, rng)

    def __call__(self, probs: Tensor) -> Tensor:
        return self.from_indices(ops.argmax(probs, axis=-1))

    def from_indices(self, tags) -> Tensor:
        return self.proj(ops.one_hot(tags, self.n_tags))
