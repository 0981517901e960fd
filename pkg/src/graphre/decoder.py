"""Greedy and maximum-spanning-arborescence decoding, plus triple extraction.

Energies use the scorer's orientation: ``energy[i, j]`` is the value of
node ``j`` heading node ``i``; node 0 is the root.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .data.documents import NONE_LABEL, DatasetSpec, EncodedGraph, EntitySpan
from .errors import DecodeError, UsageError
from .evaluation import Triple, TripleSet
from .scorer import ScorePack
from .trees import is_valid_tree

__all__ = [
    "ParseResult", "brute_force_arborescence", "build_energy", "chu_liu_edmonds", "decode",
    "extract_triples", "greedy_decode", "is_valid_tree", "mst_decode", "prediction_record",
    "recover_span", "tree_energy",
]


@dataclass
class ParseResult:
    heads: np.ndarray
    relations: np.ndarray
    decode_mode: str  # "greedy" | "mst"
    tags: Optional[np.ndarray] = None  # predicted tag index per node, root included

    @property
    def valid_tree(self) -> bool:
        return is_valid_tree(self.heads)


def _array(x) -> np.ndarray:
    return np.asarray(getattr(x, "data", x), dtype=np.float64)


def greedy_decode(sp: ScorePack, tags=None) -> ParseResult:
    s_edge, s_rel = _array(sp.s_edge), _array(sp.s_rel)
    v = s_edge.shape[0]
    heads = np.zeros(v, dtype=np.int64)
    rels = np.zeros(v, dtype=np.int64)
    for i in range(1, v):
        row = s_edge[i].copy()
        row[i] = -np.inf
        heads[i] = int(np.argmax(row))
        rels[i] = int(np.argmax(s_rel[i, heads[i]]))
    return ParseResult(heads, rels, "greedy", None if tags is None else np.asarray(tags))


def _log_softmax(x: np.ndarray) -> np.ndarray:
    m = np.max(x, axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    z = x - m
    with np.errstate(divide="ignore"):
        return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def build_energy(sp: ScorePack, scale: float = 10.0) -> np.ndarray:
    """energy[i, j] = log-softmax_j(scale·s_edge[i])[j] + max_r log-softmax_r(scale·s_rel[i, j])[r].

    Self-loops and the root row are -inf.
    """
    if scale <= 0:
        raise UsageError(f"scale must be positive, got {scale}")
    s_edge, s_rel = _array(sp.s_edge), _array(sp.s_rel)
    v = s_edge.shape[0]
    edge = scale * s_edge
    edge[np.eye(v, dtype=bool)] = -np.inf
    energy = _log_softmax(edge) + _log_softmax(scale * s_rel).max(axis=-1)
    energy[np.eye(v, dtype=bool)] = -np.inf
    energy[0, :] = -np.inf
    return energy


def tree_energy(energy: np.ndarray, heads: Sequence[int]) -> float:
    total = 0.0
    for i in range(1, len(heads)):
        total += float(energy[i, heads[i]])
    return total


def _find_cycle(heads: np.ndarray) -> Optional[List[int]]:
    n = len(heads)
    color = np.zeros(n, dtype=np.int8)
    color[0] = 2
    for start in range(1, n):
        path = []
        node = start
        while color[node] == 0:
            color[node] = 1
            path.append(node)
            node = int(heads[node])
        if color[node] == 1:
            return path[path.index(node):]
        for p in path:
            color[p] = 2
    return None


def chu_liu_edmonds(energy: np.ndarray) -> np.ndarray:
    """Maximum arborescence rooted at node 0 (no single-root constraint)."""
    score = np.array(energy, dtype=np.float64)
    n = score.shape[0]
    score[np.eye(n, dtype=bool)] = -np.inf
    score[0, :] = -np.inf
    heads = np.zeros(n, dtype=np.int64)
    for d in range(1, n):
        heads[d] = int(np.argmax(score[d]))
        if not np.isfinite(score[d, heads[d]]):
            raise DecodeError(f"node {d} has no admissible head")
    cycle = _find_cycle(heads)
    if cycle is None:
        return heads

    in_cycle = np.zeros(n, dtype=bool)
    in_cycle[cycle] = True
    outside = [u for u in range(n) if not in_cycle[u]]
    pos = {u: k for k, u in enumerate(outside)}
    c = len(outside)
    sub = np.full((c + 1, c + 1), -np.inf)
    sub[np.ix_(range(c), range(c))] = score[np.ix_(outside, outside)]
    cyc = np.array(cycle)
    gain = score[cyc] - score[cyc, heads[cyc]][:, None]  # (|C|, n): re-entering via head h
    enter_dep = {}
    for h in outside:
        k = int(np.argmax(gain[:, h]))
        sub[c, pos[h]] = gain[k, h]
        enter_dep[h] = int(cyc[k])
    leave_head = {}
    for d in outside[1:]:
        k = int(np.argmax(score[d, cyc]))
        sub[pos[d], c] = score[d, cyc[k]]
        leave_head[d] = int(cyc[k])

    sub_heads = chu_liu_edmonds(sub)
    out = heads.copy()
    for d in outside[1:]:
        h = int(sub_heads[pos[d]])
        out[d] = leave_head[d] if h == c else outside[h]
    entry = outside[int(sub_heads[c])]
    out[enter_dep[entry]] = entry
    return out


def _single_root_mst(energy: np.ndarray) -> np.ndarray:
    best, best_val = None, -np.inf
    n = energy.shape[0]
    for r in range(1, n):
        if not np.isfinite(energy[r, 0]):
            continue
        trial = np.array(energy, dtype=np.float64)
        trial[:, 0] = -np.inf
        trial[r, :] = -np.inf
        trial[r, 0] = energy[r, 0]
        try:
            heads = chu_liu_edmonds(trial)
        except DecodeError:
            continue
        val = tree_energy(energy, heads)
        if val > best_val:
            best, best_val = heads, val
    if best is None:
        raise DecodeError("no single-rooted arborescence exists")
    return best


def mst_decode(sp: ScorePack, spec: Optional[DatasetSpec] = None, scale: float = 10.0,
               single_root: Optional[bool] = None, tags=None) -> ParseResult:
    """Decode the maximum-energy arborescence; single-rooted for tree-structured datasets."""
    s_rel = _array(sp.s_rel)
    v = s_rel.shape[0]
    if v < 2:
        raise UsageError("mst_decode needs at least one word besides the root")
    if single_root is None:
        single_root = bool(spec is not None and spec.tree_structured)
    energy = build_energy(sp, scale)
    heads = _single_root_mst(energy) if single_root else chu_liu_edmonds(energy)
    heads[0] = 0
    rels = np.zeros(v, dtype=np.int64)
    for i in range(1, v):
        rels[i] = int(np.argmax(s_rel[i, heads[i]]))
    return ParseResult(heads, rels, "mst", None if tags is None else np.asarray(tags))


def decode(sp: ScorePack, spec: DatasetSpec, mode: str = "auto", scale: float = 10.0,
           tags=None) -> ParseResult:
    """``auto`` uses MST for tree-structured datasets and greedy otherwise."""
    if mode == "auto":
        mode = "mst" if spec.tree_structured else "greedy"
    if mode == "greedy":
        return greedy_decode(sp, tags)
    if mode == "mst":
        return mst_decode(sp, spec, scale, tags=tags)
    raise UsageError(f"unknown decode mode {mode!r}")


def brute_force_arborescence(energy: np.ndarray, single_root: bool = False
                             ) -> Tuple[np.ndarray, float]:
    """Exhaustive search over head assignments; ties go to the
    lexicographically smallest head array."""
    energy = np.asarray(energy, dtype=np.float64)
    n = energy.shape[0]
    if n > 8:
        raise UsageError(f"brute force limited to 8 nodes, got {n}")
    if n < 2:
        raise UsageError("need at least one non-root node")
    choices = [[j for j in range(n) if j != i and np.isfinite(energy[i, j])] for i in range(1, n)]
    best, best_val = None, -np.inf
    for combo in itertools.product(*choices):
        heads = (0,) + combo
        if not is_valid_tree(heads, single_root):
            continue
        val = tree_energy(energy, heads)
        if best is None or val > best_val:
            best, best_val = heads, val
    if best is None:
        raise DecodeError("no arborescence exists")
    return np.array(best, dtype=np.int64), best_val


def recover_span(tags: Sequence[str], anchor: int) -> Optional[EntitySpan]:
    """Entity span around word ``anchor`` from BIO tags.

    A run of I- tags with no opening B- is treated as one span (the maximal
    contiguous same-class run). Returns None for an O-tagged anchor.
    """
    tag = tags[anchor]
    if tag == "O" or len(tag) < 3:
        return None
    cls = tag[2:]
    start = anchor
    while tags[start] == f"I-{cls}" and start > 0 and tags[start - 1] in (f"B-{cls}", f"I-{cls}"):
        start -= 1
    end = anchor + 1
    while end < len(tags) and tags[end] == f"I-{cls}":
        end += 1
    return EntitySpan(start, end, cls)


def extract_triples(pr: ParseResult, graph: EncodedGraph, spec: DatasetSpec) -> TripleSet:
    """Render each non-root, non-``none`` edge as a (head text, relation, tail text) triple.

    RE spans come from the predicted tags (gold tags when the parse carries
    none); an O-tagged anchor stands for itself as a single word.
    """
    tag_ids = graph.gold_tags if pr.tags is None else pr.tags
    tag_names = [spec.tag_labels[int(t)] for t in tag_ids[1:]]
    relations = spec.relations
    words = graph.words
    out = []
    for i in range(1, len(pr.heads)):
        h, r = int(pr.heads[i]), int(pr.relations[i])
        if h == 0 or relations[r] == NONE_LABEL:
            continue
        if graph.kind == "dep":
            out.append(Triple(words[h - 1], relations[r], words[i - 1], tag_names[h - 1], tag_names[i - 1]))
            continue
        hs, ts = recover_span(tag_names, h - 1), recover_span(tag_names, i - 1)
        out.append(Triple(
            " ".join(words[hs.start:hs.end]) if hs else words[h - 1], relations[r],
            " ".join(words[ts.start:ts.end]) if ts else words[i - 1],
            hs.label if hs else None, ts.label if ts else None,
        ))
    return TripleSet(out)


def prediction_record(doc_id: str, pr: ParseResult, triples: TripleSet, spec: DatasetSpec) -> dict:
    return {
        "id": doc_id,
        "heads": [int(h) for h in pr.heads],
        "relations": [spec.relations[int(r)] for r in pr.relations],
        "triples": triples.to_json(),
        "valid_tree": bool(pr.valid_tree),
    }


def write_predictions(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
