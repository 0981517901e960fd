"""Synthetic relation-extraction corpus with a deterministic attachment rule.

Each sentence holds 2-4 entity mentions (one or two words, three classes)
scattered among filler words. Every mention after the first is the tail of
a relation whose head is the preceding mention; the label is a fixed
function of the two entity classes. Filler words attach to the root.
"""
from __future__ import annotations

from typing import List, Tuple

import numpy as np

from .documents import DatasetSpec, Document, EntitySpan, RelationTriple

ENTITY_CLASSES = ("per", "org", "loc")
RELATIONS = ("workFor", "liveIn", "basedIn", "locatedIn")


def relation_for(head_class: int, tail_class: int) -> str:
    return RELATIONS[(3 * head_class + tail_class) % 4]


def toy_spec(name: str = "toy") -> DatasetSpec:
    return DatasetSpec(name=name, format="json-triples", entity_labels=ENTITY_CLASSES,
                       relation_labels=RELATIONS)


def generate_toy_corpus(n_docs: int, seed: int = 0, min_words: int = 6, max_words: int = 12,
                        vocab_per_class: int = 15, filler_vocab: int = 30,
                        prefix: str = "toy") -> List[Document]:
    rng = np.random.default_rng(seed)
    vocab = {c: [f"{ENTITY_CLASSES[c]}_{k}" for k in range(vocab_per_class)]
             for c in range(len(ENTITY_CLASSES))}
    fillers = [f"w{k}" for k in range(filler_vocab)]
    docs = []
    for d in range(n_docs):
        n = int(rng.integers(min_words, max_words + 1))
        m = int(rng.integers(2, 5))
        lengths = [2 if rng.random() < 0.3 else 1 for _ in range(m)]
        while sum(lengths) + len(lengths) - 1 > n:
            if 2 in lengths:
                lengths[lengths.index(2)] = 1
            else:
                lengths.pop()
        m = len(lengths)
        # mentions never touch, so BIO boundaries stay unambiguous
        gaps = list(_split_gaps(rng, n - sum(lengths) - (m - 1), m + 1))
        for k in range(1, m):
            gaps[k] += 1
        words: List[str] = []
        spans: List[EntitySpan] = []
        classes: List[int] = []
        for k, length in enumerate(lengths):
            words += [str(rng.choice(fillers)) for _ in range(gaps[k])]
            c = int(rng.integers(len(ENTITY_CLASSES)))
            start = len(words)
            words += [str(rng.choice(vocab[c])) for _ in range(length)]
            spans.append(EntitySpan(start, start + length, ENTITY_CLASSES[c]))
            classes.append(c)
        words += [str(rng.choice(fillers)) for _ in range(gaps[-1])]
        triples = [RelationTriple(k - 1, k, relation_for(classes[k - 1], classes[k]))
                   for k in range(1, len(spans))]
        docs.append(Document(id=f"{prefix}-{d}", words=words, entities=spans, triples=triples))
    return docs


def _split_gaps(rng: np.random.Generator, total: int, parts: int) -> Tuple[int, ...]:
    cuts = np.sort(rng.integers(0, total + 1, size=parts - 1))
    bounds = np.concatenate([[0], cuts, [total]])
    return tuple(int(x) for x in np.diff(bounds))
