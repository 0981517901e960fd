"""scikit-learn style wrapper around the parser network."""
from __future__ import annotations

from typing import List, Optional, Sequence

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .data.documents import DatasetSpec, Document
from .decoder import ParseResult
from .embeddings import make_provider
from .errors import ConfigError, UsageError
from .evaluation import EvalReport, TripleSet, exact_micro_f1
from .network import ParserNetwork
from .training import TrainConfig, TrainResult, predict_documents, train

__all__ = ["BiaffineParser", "check_documents", "check_spec"]


def check_documents(X, *, allow_empty: bool = False, name: str = "X") -> List[Document]:
    """Validate a collection of documents and return it as a list."""
    if isinstance(X, Document):
        raise UsageError(f"{name} must be a sequence of documents, not a single document")
    try:
        docs = list(X)
    except TypeError:
        raise UsageError(f"{name} must be an iterable of Document, got {type(X).__name__}") from None
    if not docs and not allow_empty:
        raise UsageError(f"{name} is empty")
    for k, d in enumerate(docs):
        if not isinstance(d, Document):
            raise UsageError(f"{name}[{k}] is {type(d).__name__}, expected Document")
        if not d.words:
            raise UsageError(f"{name}[{k}] ({d.id}) has no words")
    ids = [d.id for d in docs]
    if len(set(ids)) != len(ids):
        raise UsageError(f"{name} contains duplicate document ids")
    return docs


def check_spec(spec, docs: Sequence[Document]) -> DatasetSpec:
    if spec is None:
        return DatasetSpec.from_documents("inferred", docs)
    if isinstance(spec, dict):
        spec = DatasetSpec.from_dict(spec)
    if not isinstance(spec, DatasetSpec):
        raise ConfigError(f"spec must be a DatasetSpec or dict, got {type(spec).__name__}")
    return spec


class BiaffineParser(BaseEstimator):
    """Joint tagger plus biaffine graph parser.

    ``fit`` takes gold-annotated documents; ``predict`` returns one
    ``TripleSet`` per document and ``score`` the exact micro-F1.
    """

    def __init__(self, spec=None, embedding: str = "hash-random", d_f: int = 768,
                 embedding_path: Optional[str] = None, l_psi: int = 1, l_phi: int = 0,
                 d_h: int = 300, d_tag: int = 100, d_psi: int = 300, d_edge: int = 256,
                 d_rel: int = 128, top_k: int = 3, oracle_tags: bool = False, lr: float = 1e-3,
                 batch_size: int = 8, max_steps: int = 3000, eval_every: int = 500,
                 lambda_tag: float = 0.1, lambda_parse: float = 1.0, weight_decay: float = 0.0,
                 clip_norm: Optional[float] = None, decode_mode: str = "auto", scale: float = 10.0,
                 seed: int = 0, out_dir: Optional[str] = None):
        self.spec = spec
        self.embedding = embedding
        self.d_f = d_f
        self.embedding_path = embedding_path
        self.l_psi = l_psi
        self.l_phi = l_phi
        self.d_h = d_h
        self.d_tag = d_tag
        self.d_psi = d_psi
        self.d_edge = d_edge
        self.d_rel = d_rel
        self.top_k = top_k
        self.oracle_tags = oracle_tags
        self.lr = lr
        self.batch_size = batch_size
        self.max_steps = max_steps
        self.eval_every = eval_every
        self.lambda_tag = lambda_tag
        self.lambda_parse = lambda_parse
        self.weight_decay = weight_decay
        self.clip_norm = clip_norm
        self.decode_mode = decode_mode
        self.scale = scale
        self.seed = seed
        self.out_dir = out_dir

    def _train_config(self) -> TrainConfig:
        return TrainConfig(lr=self.lr, batch_size=self.batch_size, max_steps=self.max_steps,
                           eval_every=self.eval_every, lambda_tag=self.lambda_tag,
                           lambda_parse=self.lambda_parse, weight_decay=self.weight_decay,
                           clip_norm=self.clip_norm, seed=self.seed, oracle_tags=self.oracle_tags)

    def fit(self, X, y=None, X_dev=None) -> "BiaffineParser":
        """Train on documents ``X``; ``y`` is ignored (gold lives in the documents).

        The best dev checkpoint (by exact micro-F1) is kept when ``X_dev`` is
        given, otherwise the final weights.
        """
        docs = check_documents(X)
        dev = check_documents(X_dev, allow_empty=True, name="X_dev") if X_dev is not None else []
        if self.decode_mode not in ("auto", "greedy", "mst"):
            raise ConfigError(f"unknown decode_mode {self.decode_mode!r}")
        cfg = self._train_config()
        spec = check_spec(self.spec, docs)
        provider = make_provider(self.embedding, self.d_f, self.seed, self.embedding_path, docs)
        net = ParserNetwork(spec, provider, l_psi=self.l_psi, l_phi=self.l_phi, d_h=self.d_h,
                            d_tag=self.d_tag, d_psi=self.d_psi, d_edge=self.d_edge,
                            d_rel=self.d_rel, top_k=self.top_k, oracle_tags=self.oracle_tags,
                            seed=self.seed)
        result = train(net, cfg, docs, dev, out_dir=self.out_dir, decode_mode=self.decode_mode,
                       scale=self.scale)
        if dev:
            net.load_state_dict(result.best_state)
        self.network_ = net
        self.spec_ = spec
        self.train_result_: TrainResult = result
        return self

    @classmethod
    def from_network(cls, network: ParserNetwork, **params) -> "BiaffineParser":
        """Wrap an already-trained network (e.g. one loaded from a checkpoint)."""
        hp = {k: v for k, v in network.hparams.items()}
        est = cls(spec=network.spec, d_f=network.provider.d_f, **hp, **params)
        est.network_ = network
        est.spec_ = network.spec
        return est

    def parse(self, X) -> List[ParseResult]:
        check_is_fitted(self, "network_")
        docs = check_documents(X, allow_empty=True)
        return [pr for _, _, pr, _, _ in predict_documents(self.network_, docs, mode=self.decode_mode,
                                                           scale=self.scale)]

    def predict(self, X) -> List[TripleSet]:
        check_is_fitted(self, "network_")
        docs = check_documents(X, allow_empty=True)
        return [t for _, _, _, t, _ in predict_documents(self.network_, docs, mode=self.decode_mode,
                                                         scale=self.scale)]

    def transform(self, X) -> List[ParseResult]:
        return self.parse(X)

    def evaluate(self, X) -> EvalReport:
        docs = check_documents(X)
        preds = self.predict(docs)
        return exact_micro_f1({d.id: p for d, p in zip(docs, preds)},
                              {d.id: d.gold_triples() for d in docs},
                              ks={d.id: d.k for d in docs})

    def score(self, X, y=None) -> float:
        return self.evaluate(X).f1
