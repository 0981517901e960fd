"""Core data types shared by loaders, the parser and the evaluator."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

NONE_LABEL = "none"
ROOT_TOKEN = "<root>"


@dataclass(frozen=True)
class EntitySpan:
    start: int
    end: int  # exclusive
    label: str


@dataclass(frozen=True)
class RelationTriple:
    """A labelled edge. ``head``/``tail`` index ``Document.entities`` for RE
    documents and ``Document.words`` for dependency documents."""

    head: int
    tail: int
    label: str


@dataclass
class Document:
    id: str
    words: List[str]
    text: str = ""
    entities: List[EntitySpan] = field(default_factory=list)
    triples: List[RelationTriple] = field(default_factory=list)
    word_tags: Optional[List[str]] = None
    # dependency documents only: (word index, label) of root attachments
    roots: List[Tuple[int, str]] = field(default_factory=list)
    kind: str = "re"  # "re" | "dep"

    def __post_init__(self):
        if not self.text:
            self.text = " ".join(self.words)

    @property
    def k(self) -> int:
        """Number of gold relations; root attachments never count."""
        return sum(1 for t in self.triples if t.label != NONE_LABEL)

    def span_text(self, span: EntitySpan) -> str:
        return " ".join(self.words[span.start:span.end])

    def gold_triples(self):
        """Gold relations as an evaluation ``TripleSet``."""
        from ..evaluation import Triple, TripleSet

        items = []
        for t in self.triples:
            if t.label == NONE_LABEL:
                continue
            if self.kind == "re":
                h, tl = self.entities[t.head], self.entities[t.tail]
                items.append(Triple(self.span_text(h), t.label, self.span_text(tl), h.label, tl.label))
            else:
                tags = self.word_tags or [None] * len(self.words)
                items.append(Triple(self.words[t.head], t.label, self.words[t.tail],
                                    tags[t.head], tags[t.tail]))
        return TripleSet(items)


@dataclass
class DatasetSpec:
    name: str
    format: str  # "conllu" | "json-triples"
    entity_labels: Tuple[str, ...]
    relation_labels: Tuple[str, ...]
    tree_structured: bool = False
    oracle_tags: bool = False
    anchor: str = "last"  # "first" | "last"

    def __post_init__(self):
        from ..errors import ConfigError

        self.entity_labels = tuple(self.entity_labels)
        self.relation_labels = tuple(r for r in self.relation_labels if r != NONE_LABEL)
        if self.format not in ("conllu", "json-triples"):
            raise ConfigError(f"unknown dataset format {self.format!r}")
        if not self.entity_labels or not self.relation_labels:
            raise ConfigError(f"dataset {self.name}: label sets must be non-empty")
        if self.anchor not in ("first", "last"):
            raise ConfigError(f"anchor must be 'first' or 'last', got {self.anchor!r}")

    @property
    def is_dependency(self) -> bool:
        return self.format == "conllu"

    @property
    def tag_labels(self) -> Tuple[str, ...]:
        """Word-level tag vocabulary: xPOS tags for treebanks, BIO otherwise."""
        if self.is_dependency:
            return self.entity_labels
        return ("O",) + tuple(f"{p}-{e}" for e in self.entity_labels for p in ("B", "I"))

    @property
    def relations(self) -> Tuple[str, ...]:
        """Relation vocabulary with ``none`` at index 0."""
        return (NONE_LABEL,) + self.relation_labels

    def to_dict(self) -> Dict:
        return {
            "name": self.name, "format": self.format,
            "entity_labels": list(self.entity_labels),
            "relation_labels": list(self.relation_labels),
            "tree_structured": self.tree_structured, "oracle_tags": self.oracle_tags,
            "anchor": self.anchor,
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "DatasetSpec":
        return cls(**d)

    @classmethod
    def from_documents(cls, name: str, docs: Sequence[Document], **kw) -> "DatasetSpec":
        """Infer label sets from documents (sorted for stability)."""
        dep = bool(docs) and docs[0].kind == "dep"
        if dep:
            ents = sorted({t for d in docs for t in (d.word_tags or [])})
            rels = sorted({t.label for d in docs for t in d.triples} | {lab for d in docs for _, lab in d.roots})
            kw.setdefault("tree_structured", True)
        else:
            ents = sorted({e.label for d in docs for e in d.entities})
            rels = sorted({t.label for d in docs for t in d.triples})
        return cls(name=name, format="conllu" if dep else "json-triples",
                   entity_labels=tuple(ents), relation_labels=tuple(rels), **kw)


@dataclass
class EncodedGraph:
    """Parser view of one document; node 0 is the virtual root."""

    doc_id: str
    words: List[str]
    gold_heads: np.ndarray
    gold_relations: np.ndarray
    gold_tags: np.ndarray
    spans: List[EntitySpan]
    kind: str
    dropped_triples: int = 0

    @property
    def node_count(self) -> int:
        return len(self.words) + 1


@dataclass(frozen=True)
class StatsRow:
    min_k: int
    mean_k: float
    max_k: int
    pct_k_le_5: float
    avg_chars: float
    n_docs: int = 0
