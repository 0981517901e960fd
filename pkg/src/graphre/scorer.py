"""Edge/relation scoring: optional BiLSTM, four MLP projections, biaffine
attention, and optional GAT refinement over a top-k sparsified graph.

Orientation: ``s_edge[i, j]`` is the score of node ``j`` heading node ``i``
(rows are dependents, columns candidate heads). ``s_rel[i, j, r]`` scores
relation ``r`` on that edge.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import ConfigError, DimensionError, UsageError
from .numerics import ops
from .numerics.nn import MLP, BiLSTM, LayerNorm, Module, Parameter, xavier_uniform
from .numerics.tensor import Tensor


@dataclass(frozen=True)
class ScorerConfig:
    d_in: int
    n_rel: int
    l_psi: int = 0
    l_phi: int = 0
    d_psi: int = 300
    d_edge: int = 256
    d_rel: int = 128
    top_k: int = 3

    def __post_init__(self):
        if not (0 <= self.l_psi <= 3 and 0 <= self.l_phi <= 3):
            raise ConfigError(f"l_psi and l_phi must lie in 0..3, got {self.l_psi}, {self.l_phi}")
        if min(self.d_in, self.n_rel, self.d_psi, self.d_edge, self.d_rel) <= 0 or self.top_k < 1:
            raise ConfigError(f"scorer dimensions must be positive and top_k >= 1: {self}")


@dataclass
class ScorePack:
    s_edge: Tensor  # (|V|, |V|), diagonal -inf
    s_rel: Tensor  # (|V|, |V|, |R|)
    aux_edge_scores: List[Tensor] = field(default_factory=list)

    @property
    def n_nodes(self) -> int:
        return self.s_edge.shape[0]


def biaffine_all_pairs(heads: Tensor, deps: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """out[i, j, r] = heads[j]ᵀ W[:, r, :] deps[i] + heads[j]ᵀ b[:, r]."""
    d, m, d2 = weight.shape
    if heads.shape[1] != d or deps.shape[1] != d2 or bias.shape != (d, m) or heads.shape[0] != deps.shape[0]:
        raise DimensionError(
            f"biaffine: heads {heads.shape}, deps {deps.shape}, W {weight.shape}, b {bias.shape}")
    v = heads.shape[0]
    left = ops.matmul(heads, ops.reshape(weight, (d, m * d2)))  # (v, m*d2)
    pair = ops.matmul(ops.reshape(left, (v * m, d2)), ops.transpose(deps))  # (v*m, v) [j,r,i]
    pair = ops.transpose(ops.reshape(pair, (v, m, v)), (2, 0, 1))  # (i, j, r)
    head_bias = ops.reshape(ops.matmul(heads, bias), (1, v, m))
    return pair + head_bias


def biaffine(x1, x2, weight, bias) -> Tensor:
    """Score vector f(x1, x2) = x1ᵀ W x2 + x1ᵀ b for one (head, dependent) pair."""
    x1, x2 = ops.as_tensor(x1), ops.as_tensor(x2)
    weight, bias = ops.as_tensor(weight), ops.as_tensor(bias)
    if x1.ndim != 1 or x2.ndim != 1:
        raise DimensionError(f"biaffine: expected vectors, got {x1.shape} and {x2.shape}")
    if weight.ndim == 2:
        weight = ops.reshape(weight, (weight.shape[0], 1, weight.shape[1]))
    if bias.ndim == 1:
        bias = ops.reshape(bias, (bias.shape[0], 1))
    out = biaffine_all_pairs(ops.reshape(x1, (1, -1)), ops.reshape(x2, (1, -1)), weight, bias)
    return ops.reshape(out, (weight.shape[1],))


class Biaffine(Module):
    def __init__(self, d: int, m: int, rng: np.random.Generator):
        self.m = m
        w = np.stack([xavier_uniform(rng, d, d) for _ in range(m)], axis=1)
        self.weight = Parameter(w)
        self.bias = Parameter(np.zeros((d, m)))

    def __call__(self, heads: Tensor, deps: Tensor) -> Tensor:
        out = biaffine_all_pairs(heads, deps, self.weight, self.bias)
        return ops.reshape(out, out.shape[:2]) if self.m == 1 else out


def mask_self(scores: Tensor) -> Tensor:
    return ops.masked_fill(scores, np.eye(scores.shape[0], dtype=bool), -np.inf)


def topk_sparsify(scores: np.ndarray, k: int) -> np.ndarray:
    """Boolean adjacency keeping, for each non-root row, the ``k`` best
    candidate heads (self excluded; ties go to the lower column). The root
    row keeps only itself so its attention is well defined."""
    if k < 1:
        raise UsageError(f"top_k must be >= 1, got {k}")
    scores = np.asarray(scores, dtype=np.float64)
    v = scores.shape[0]
    adj = np.zeros((v, v), dtype=bool)
    adj[0, 0] = True
    keep = min(k, v - 1)
    for i in range(1, v):
        row = scores[i].copy()
        cols = [j for j in np.argsort(-row, kind="stable") if j != i][:keep]
        adj[i, cols] = True
    return adj


class GATLayer(Module):
    """Single-head attentive GAT layer with residual + layer norm.

    score(i, j) = aᵀ LeakyReLU(W_l e_i + W_r e_j), softmax over the
    neighbourhood of i; message W_r e_j; out_i = LN(e_i + ELU(Σ α_ij W_r e_j)).
    """

    def __init__(self, d: int, rng: np.random.Generator, slope: float = 0.2):
        self.w_left = Parameter(xavier_uniform(rng, d, d))
        self.w_right = Parameter(xavier_uniform(rng, d, d))
        self.att = Parameter(xavier_uniform(rng, d, 1).reshape(d))
        self.norm = LayerNorm(d)
        self.slope = slope

    def attention(self, e: Tensor, adj: np.ndarray) -> Tensor:
        adj = np.asarray(adj, dtype=bool)
        if not adj.any(axis=1).all():
            raise AssertionError("GAT neighbourhood empty for some node")
        v, d = e.shape
        left = ops.reshape(ops.matmul(e, self.w_left), (v, 1, d))
        right = ops.reshape(ops.matmul(e, self.w_right), (1, v, d))
        hidden = ops.leaky_relu(left + right, self.slope)
        scores = ops.reshape(ops.matmul(ops.reshape(hidden, (v * v, d)),
                                        ops.reshape(self.att, (d, 1))), (v, v))
        return ops.softmax(ops.masked_fill(scores, ~adj, -np.inf), axis=-1)

    def __call__(self, e: Tensor, adj: np.ndarray) -> Tensor:
        alpha = self.attention(e, adj)
        message = ops.matmul(alpha, ops.matmul(e, self.w_right))
        return self.norm(e + ops.elu(message))


def gat_layer(e: Tensor, adj: np.ndarray, layer: GATLayer) -> Tensor:
    return layer(e, adj)


class Scorer(Module):
    def __init__(self, cfg: ScorerConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.encoder: Optional[BiLSTM] = BiLSTM(cfg.d_in, cfg.d_psi, cfg.l_psi, rng) if cfg.l_psi else None
        d_h = 2 * cfg.d_psi if cfg.l_psi else cfg.d_in
        self.edge_head = MLP(d_h, cfg.d_edge, cfg.d_edge, rng)
        self.edge_dep = MLP(d_h, cfg.d_edge, cfg.d_edge, rng)
        self.rel_head = MLP(d_h, cfg.d_rel, cfg.d_rel, rng)
        self.rel_dep = MLP(d_h, cfg.d_rel, cfg.d_rel, rng)
        self.aux_biaffine = [Biaffine(cfg.d_edge, 1, rng) for _ in range(cfg.l_phi)]
        self.gat_head = [GATLayer(cfg.d_edge, rng) for _ in range(cfg.l_phi)]
        self.gat_dep = [GATLayer(cfg.d_edge, rng) for _ in range(cfg.l_phi)]
        self.edge_biaffine = Biaffine(cfg.d_edge, 1, rng)
        self.rel_biaffine = Biaffine(cfg.d_rel, cfg.n_rel, rng)

    def __call__(self, z: Tensor) -> ScorePack:
        if z.ndim != 2 or z.shape[1] != self.cfg.d_in:
            raise DimensionError(f"scorer expects (|V|, {self.cfg.d_in}) input, got {z.shape}")
        if z.shape[0] < 2:
            raise UsageError("scorer needs at least one word besides the root")
        h = self.encoder(z) if self.encoder is not None else z
        eh, ed = self.edge_head(h), self.edge_dep(h)
        rh, rd = self.rel_head(h), self.rel_dep(h)
        aux = []
        for biaf, gh, gd in zip(self.aux_biaffine, self.gat_head, self.gat_dep):
            s_aux = mask_self(biaf(eh, ed))
            aux.append(s_aux)
            adj = topk_sparsify(s_aux.data, self.cfg.top_k)
            eh, ed = gh(eh, adj), gd(ed, adj)
        s_edge = mask_self(self.edge_biaffine(eh, ed))
        s_rel = self.rel_biaffine(rh, rd)
        return ScorePack(s_edge, s_rel, aux)
