"""Converters from native distributions into canonical documents.

Supported sources:

* SpERT-style JSON (the common CoNLL04 and ADE releases): the same
  token/entity/relation layout as the canonical schema, keyed by
  ``orig_id``.
* DyGIE-style JSON lines (SciERC): one abstract per line with
  ``sentences``, ``ner`` and ``relations`` given as inclusive
  document-level token offsets; each sentence becomes one document.
* ERFGC already exported to canonical JSON: relations labelled ``-``
  are removed.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import List

from ..errors import DataIntegrityError, FormatError
from .documents import Document, EntitySpan, RelationTriple
from .json_triples import parse_json_triples


def from_spert(path) -> List[Document]:
    return parse_json_triples(json.loads(Path(path).read_text(encoding="utf-8")))


def from_dygie(path, drop_empty: bool = False) -> List[Document]:
    docs = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{line_no}: {exc}") from None
        offset = 0
        for s, sent in enumerate(rec["sentences"]):
            ner = rec.get("ner", [[]] * len(rec["sentences"]))[s]
            rels = rec.get("relations", [[]] * len(rec["sentences"]))[s]
            spans, index = [], {}
            for start, end, label in ner:
                key = (start - offset, end - offset + 1)
                index[key] = len(spans)
                spans.append(EntitySpan(key[0], key[1], label))
            triples = []
            for hs, he, ts, te, label in rels:
                try:
                    h = index[(hs - offset, he - offset + 1)]
                    t = index[(ts - offset, te - offset + 1)]
                except KeyError:
                    raise DataIntegrityError(
                        f"{rec.get('doc_key')}#{s}: relation endpoint is not an annotated entity") from None
                triples.append(RelationTriple(h, t, label))
            offset += len(sent)
            if drop_empty and not triples:
                continue
            docs.append(Document(id=f"{rec.get('doc_key', line_no)}#{s}", words=list(sent),
                                 entities=spans, triples=triples, kind="re"))
    return docs


def drop_relation_label(docs: List[Document], label: str = "-") -> List[Document]:
    """Remove every relation carrying ``label`` (ERFGC's ``-`` annotations)."""
    for d in docs:
        d.triples = [t for t in d.triples if t.label != label]
    return docs
