"""Joint loss and the mini-batch training loop."""
from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from .data.documents import Document, EncodedGraph
from .data.encode import encode_graph
from .decoder import decode, extract_triples
from .errors import ConfigError, UsageError
from .evaluation import exact_micro_f1
from .network import ParserNetwork
from .numerics import ops
from .numerics.checkpoint import save_checkpoint
from .numerics.optim import adamw_step, clip_grad_norm
from .numerics.tensor import Tensor, no_grad
from .scorer import ScorePack
from .tagger import TaggerOutput

logger = logging.getLogger(__name__)

LOG_HEADER = ("step", "split", "L_tag", "L_edge", "L_rel", "L", "micro_P", "micro_R", "micro_F1")


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 8
    max_steps: int = 3000
    eval_every: int = 500
    lambda_tag: float = 0.1
    lambda_parse: float = 1.0
    weight_decay: float = 0.0
    clip_norm: Optional[float] = None
    seed: int = 0
    oracle_tags: bool = False

    def __post_init__(self):
        if self.oracle_tags:
            self.lambda_tag = 0.0
        if self.batch_size < 1 or self.max_steps < 1 or self.eval_every < 1:
            raise ConfigError("batch_size, max_steps and eval_every must be positive")
        if self.max_steps % self.eval_every:
            raise ConfigError(f"eval_every ({self.eval_every}) must divide max_steps ({self.max_steps})")
        if self.lambda_tag < 0 or self.lambda_parse <= 0:
            raise ConfigError("need lambda_tag >= 0 and lambda_parse > 0")
        if self.lr <= 0 or self.weight_decay < 0:
            raise ConfigError("need lr > 0 and weight_decay >= 0")


class Losses(NamedTuple):
    tag: Tensor
    edge: Tensor
    rel: Tensor
    total: Tensor


def _head_nll(scores: Tensor, gold_heads: np.ndarray) -> Tensor:
    n = len(gold_heads) - 1
    logp = ops.log_softmax(scores[1:], axis=-1)
    return -ops.tsum(logp[np.arange(n), gold_heads[1:]])


def compute_loss(sp: ScorePack, tag_out: Optional[TaggerOutput], graph: EncodedGraph,
                 cfg: TrainConfig) -> Losses:
    """Per-document joint loss.

    Tagging: mean cross-entropy over non-root words. Edges: per-dependent
    softmax over candidate heads, summed. Relations: cross-entropy of the
    gold label on each gold edge, summed. Every auxiliary GAT adjacency adds
    an edge term against the gold heads.
    """
    n = graph.node_count - 1
    if tag_out is None:
        l_tag = Tensor(0.0)
    else:
        logp_tag = ops.log_softmax(tag_out.logits[1:], axis=-1)
        l_tag = -ops.tsum(logp_tag[np.arange(n), graph.gold_tags[1:]]) * (1.0 / n)
    l_edge = _head_nll(sp.s_edge, graph.gold_heads)
    rows = np.arange(1, n + 1)
    rel_scores = sp.s_rel[rows, graph.gold_heads[1:]]  # (n, |R|)
    l_rel = -ops.tsum(ops.log_softmax(rel_scores, axis=-1)[np.arange(n), graph.gold_relations[1:]])
    parse = l_edge + l_rel
    for aux in sp.aux_edge_scores:
        parse = parse + _head_nll(aux, graph.gold_heads)
    total = l_tag * cfg.lambda_tag + parse * cfg.lambda_parse
    return Losses(l_tag, l_edge, l_rel, total)


def batch_loss(network: ParserNetwork, batch: Sequence[Document], graphs: Sequence[EncodedGraph],
               cfg: TrainConfig) -> Losses:
    """Mean of the per-document losses over the batch."""
    parts = []
    for doc, g in zip(batch, graphs):
        tag_out, sp, _ = network(doc, g)
        parts.append(compute_loss(sp, tag_out, g, cfg))
    scale = 1.0 / len(parts)
    summed = []
    for k in range(len(Losses._fields)):
        acc = parts[0][k]
        for p in parts[1:]:
            acc = acc + p[k]
        summed.append(acc * scale)
    return Losses(*summed)


@dataclass
class EvalEvent:
    step: int
    losses: Dict[str, float]
    precision: float
    recall: float
    f1: float


@dataclass
class TrainResult:
    log_rows: List[Dict[str, Any]]
    best_step: int
    best_f1: float
    best_state: Dict[str, np.ndarray]
    loss_trajectory: List[float] = field(default_factory=list)

    def log_csv(self) -> str:
        return format_log(self.log_rows)


def format_log(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=LOG_HEADER, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (f"{v:.8f}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def _decode_one(network: ParserNetwork, doc: Document, graph: EncodedGraph, mode: str, scale: float):
    tag_out, sp, tags = network(doc, graph)
    pr = decode(sp, network.spec, mode=mode, scale=scale, tags=tags)
    return doc, graph, pr, extract_triples(pr, graph, network.spec), (tag_out, sp)


def predict_documents(network: ParserNetwork, docs: Sequence[Document],
                      graphs: Optional[Sequence[EncodedGraph]] = None, mode: str = "auto",
                      scale: float = 10.0, jobs: int = 1) -> list:
    """Decode documents in input order.

    Returns (doc, graph, ParseResult, TripleSet, (tagger output, scores))
    tuples. ``jobs > 1`` spreads documents over a thread pool.
    """
    if graphs is None:
        graphs = [encode_graph(d, network.spec) for d in docs]
    with no_grad():
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                return list(pool.map(lambda dg: _decode_one(network, dg[0], dg[1], mode, scale),
                                     zip(docs, graphs)))
        return [_decode_one(network, d, g, mode, scale) for d, g in zip(docs, graphs)]


def evaluate(network: ParserNetwork, docs: Sequence[Document], graphs: Sequence[EncodedGraph],
             cfg: TrainConfig, mode: str = "auto", scale: float = 10.0) -> EvalEvent:
    preds, golds = {}, {}
    sums = np.zeros(4)
    for doc, g, pr, triples, (tag_out, sp) in predict_documents(network, docs, graphs, mode, scale):
        preds[doc.id] = triples
        golds[doc.id] = doc.gold_triples()
        sums += [float(x.data) for x in compute_loss(sp, tag_out, g, cfg)]
    report = exact_micro_f1(preds, golds)
    means = sums / max(1, len(docs))
    return EvalEvent(0, dict(zip(("L_tag", "L_edge", "L_rel", "L"), means)),
                     report.precision, report.recall, report.f1)


def train(network: ParserNetwork, cfg: TrainConfig, train_docs: Sequence[Document],
          dev_docs: Sequence[Document], out_dir=None, run_config: Optional[dict] = None,
          decode_mode: str = "auto", scale: float = 10.0) -> TrainResult:
    """Mini-batch AdamW training with periodic dev evaluation.

    Every ``eval_every`` steps a train row (mean batch losses since the last
    evaluation) and a dev row (losses and exact micro P/R/F1) are logged. With
    ``out_dir`` the log, the latest checkpoint and the best-dev checkpoint are
    written there.
    """
    if not train_docs:
        raise UsageError("training split is empty")
    if bool(cfg.oracle_tags) != bool(network.oracle_tags):
        raise ConfigError("TrainConfig.oracle_tags disagrees with the network")
    spec = network.spec
    train_graphs = [encode_graph(d, spec) for d in train_docs]
    dev_graphs = [encode_graph(d, spec) for d in dev_docs]
    params = network.parameters()
    rng = np.random.default_rng(cfg.seed)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    run_config = dict(run_config or network.config())
    run_config.setdefault("training", asdict(cfg))

    order = rng.permutation(len(train_docs))
    cursor = 0
    window = []
    trajectory = []
    rows: List[Dict[str, Any]] = []
    best_f1, best_step, best_state = -1.0, 0, network.state_dict()

    for step in range(1, cfg.max_steps + 1):
        idx = []
        while len(idx) < cfg.batch_size:
            if cursor == len(order):
                order = rng.permutation(len(train_docs))
                cursor = 0
            take = order[cursor:cursor + cfg.batch_size - len(idx)]
            idx.extend(int(i) for i in take)
            cursor += len(take)
        losses = batch_loss(network, [train_docs[i] for i in idx], [train_graphs[i] for i in idx], cfg)
        losses.total.backward()
        if cfg.clip_norm:
            clip_grad_norm(params, cfg.clip_norm)
        adamw_step(params, cfg.lr, weight_decay=cfg.weight_decay)
        vals = [float(x.data) for x in losses]
        window.append(vals)
        trajectory.append(vals[3])

        if step % cfg.eval_every == 0:
            mean = np.mean(window, axis=0)
            window = []
            rows.append({"step": step, "split": "train", "L_tag": mean[0], "L_edge": mean[1],
                         "L_rel": mean[2], "L": mean[3], "micro_P": "", "micro_R": "", "micro_F1": ""})
            ev = evaluate(network, dev_docs, dev_graphs, cfg, decode_mode, scale) if dev_docs else None
            if ev is not None:
                rows.append({"step": step, "split": "dev", **ev.losses, "micro_P": ev.precision,
                             "micro_R": ev.recall, "micro_F1": ev.f1})
                logger.info("step %d dev F1 %.4f (train L %.4f)", step, ev.f1, mean[3])
            f1 = ev.f1 if ev is not None else -float(mean[3])
            improved = f1 > best_f1
            if improved:
                best_f1, best_step, best_state = f1, step, network.state_dict()
            if out is not None:
                extra = {"step": step, "dev_f1": f1}
                save_checkpoint(out / "last.json", network.state_dict(), run_config, extra)
                if improved:
                    save_checkpoint(out / "best.json", best_state, run_config, extra)
                (out / "metrics.csv").write_text(format_log(rows))
    return TrainResult(rows, best_step, best_f1, best_state, trajectory)
