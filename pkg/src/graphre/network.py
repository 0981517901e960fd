"""The full parser network: features -> tagger -> tag embeddings -> scorer."""
from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from .data.documents import DatasetSpec, Document, EncodedGraph
from .embeddings import EmbeddingProvider, provider_from_config
from .errors import UsageError
from .numerics import ops
from .numerics.checkpoint import load_checkpoint
from .numerics.nn import Module, name_parameters
from .scorer import Scorer, ScorerConfig, ScorePack
from .tagger import TagEmbedder, Tagger, TaggerConfig, TaggerOutput


class ParserNetwork(Module):
    def __init__(self, spec: DatasetSpec, provider: EmbeddingProvider, *, l_psi: int = 0,
                 l_phi: int = 0, d_h: int = 300, d_tag: int = 100, d_psi: int = 300,
                 d_edge: int = 256, d_rel: int = 128, top_k: int = 3, oracle_tags: bool = False,
                 seed: int = 0):
        self.hparams = dict(l_psi=l_psi, l_phi=l_phi, d_h=d_h, d_tag=d_tag, d_psi=d_psi,
                            d_edge=d_edge, d_rel=d_rel, top_k=top_k, oracle_tags=oracle_tags,
                            seed=seed)
        rng = np.random.default_rng(seed)
        n_tags = len(spec.tag_labels)
        self.spec = spec
        self.oracle_tags = oracle_tags
        self.provider = provider
        self.tagger = Tagger(TaggerConfig(provider.d_f, n_tags, d_h, d_tag), rng)
        self.tag_embedder = TagEmbedder(n_tags, d_tag, rng)
        self.scorer = Scorer(ScorerConfig(d_in=d_tag + provider.d_f, n_rel=len(spec.relations),
                                          l_psi=l_psi, l_phi=l_phi, d_psi=d_psi, d_edge=d_edge,
                                          d_rel=d_rel, top_k=top_k), rng)
        name_parameters(self)

    def config(self) -> dict:
        return {"dataset": self.spec.to_dict(), "model": dict(self.hparams),
                "embeddings": self.provider.config()}

    @classmethod
    def from_config(cls, config: dict) -> "ParserNetwork":
        spec = DatasetSpec.from_dict(config["dataset"])
        return cls(spec, provider_from_config(config["embeddings"]), **config["model"])

    def __call__(self, doc: Document, graph: Optional[EncodedGraph] = None
                 ) -> Tuple[Optional[TaggerOutput], ScorePack, np.ndarray]:
        """Returns the tagger output (None under oracle tags), the score pack
        and the tag indices fed to the scorer (root row included)."""
        x = self.provider.embed(doc)
        if self.oracle_tags:
            if graph is None:
                raise UsageError("oracle tags need the encoded gold graph")
            tags = np.asarray(graph.gold_tags)
            tag_out = None
        else:
            tag_out = self.tagger(x)
            tags = ops.argmax(tag_out.probs, axis=-1)
        e_tag = self.tag_embedder.from_indices(tags)
        sp = self.scorer(ops.concat([e_tag, x], axis=1))
        return tag_out, sp, tags


def load_network(path) -> Tuple[ParserNetwork, dict, dict]:
    """Rebuild a network from a checkpoint; returns (network, config, extra)."""
    state, config, extra = load_checkpoint(path)
    net = ParserNetwork.from_config(config)
    net.load_state_dict(state)
    return net, config, extra
