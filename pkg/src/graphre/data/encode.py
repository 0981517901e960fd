"""Document -> EncodedGraph: virtual root, BIO tags, anchored head/relation arrays."""
from __future__ import annotations

import logging
from typing import List

import numpy as np

from ..errors import DataIntegrityError, EncodingError
from ..trees import is_valid_tree
from .documents import NONE_LABEL, DatasetSpec, Document, EncodedGraph, EntitySpan

logger = logging.getLogger(__name__)


def bio_tags(n_words: int, spans: List[EntitySpan]) -> List[str]:
    tags = ["O"] * n_words
    for s in sorted(spans, key=lambda s: s.start):
        if any(t != "O" for t in tags[s.start:s.end]):
            raise EncodingError(f"overlapping entity spans at [{s.start},{s.end})")
        tags[s.start] = f"B-{s.label}"
        for k in range(s.start + 1, s.end):
            tags[k] = f"I-{s.label}"
    return tags


def anchor_of(span: EntitySpan, anchor: str = "last") -> int:
    """Word index (root offset not applied) that stands for ``span`` in the graph."""
    return span.end - 1 if anchor == "last" else span.start


def encode_graph(doc: Document, spec: DatasetSpec) -> EncodedGraph:
    n = len(doc.words)
    if n == 0:
        raise EncodingError(f"document {doc.id}: no words")
    rel_index = {r: k for k, r in enumerate(spec.relations)}
    tag_index = {t: k for k, t in enumerate(spec.tag_labels)}
    heads = np.zeros(n + 1, dtype=np.int64)
    rels = np.zeros(n + 1, dtype=np.int64)
    dropped = 0

    def rel_id(label):
        try:
            return rel_index[label]
        except KeyError:
            raise DataIntegrityError(f"document {doc.id}: relation {label!r} not in dataset spec") from None

    if doc.kind == "dep":
        tags = doc.word_tags or []
        for t in doc.triples:
            heads[t.tail + 1] = t.head + 1
            rels[t.tail + 1] = rel_id(t.label)
        for w, label in doc.roots:
            heads[w + 1] = 0
            rels[w + 1] = rel_id(label)
        if not is_valid_tree(heads):
            raise DataIntegrityError(f"document {doc.id}: gold heads do not form a tree")
        spans = []
    else:
        spans = list(doc.entities)
        tags = bio_tags(n, spans)
        assigned = np.zeros(n + 1, dtype=bool)
        for t in doc.triples:
            if t.label == NONE_LABEL:
                continue
            h = anchor_of(spans[t.head], spec.anchor) + 1
            d = anchor_of(spans[t.tail], spec.anchor) + 1
            if assigned[d]:
                dropped += 1
                continue
            heads[d] = h
            rels[d] = rel_id(t.label)
            assigned[d] = True
        if dropped:
            logger.warning("document %s: %d triple(s) share a tail with an earlier triple and were dropped",
                           doc.id, dropped)

    try:
        tag_ids = [0] + [tag_index[t] for t in tags] if tags else [0] * (n + 1)
    except KeyError as exc:
        raise DataIntegrityError(f"document {doc.id}: tag {exc.args[0]!r} not in dataset spec") from None
    return EncodedGraph(
        doc_id=doc.id, words=list(doc.words), gold_heads=heads, gold_relations=rels,
        gold_tags=np.asarray(tag_ids, dtype=np.int64), spans=spans, kind=doc.kind,
        dropped_triples=dropped,
    )
