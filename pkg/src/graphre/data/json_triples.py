"""Canonical relation-extraction JSON: an array of
``{"id", "tokens", "entities": [{"start","end","type"}], "relations": [{"head","tail","type"}]}``
objects, with ``head``/``tail`` indexing ``entities``. ``text`` is optional.
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import List, Optional

from ..errors import DataIntegrityError, FormatError
from .documents import DatasetSpec, Document, EntitySpan, RelationTriple


def schema() -> dict:
    """The JSON Schema describing the canonical format."""
    return json.loads(resources.files(__package__).joinpath("schema.json").read_text())


def _document(obj, pos: int, spec: Optional[DatasetSpec]) -> Document:
    doc_id = str(obj.get("id", obj.get("orig_id", pos)))
    try:
        words = [str(w) for w in obj["tokens"]]
        raw_ents = obj.get("entities", [])
        raw_rels = obj.get("relations", [])
    except (KeyError, TypeError):
        raise FormatError(f"document {doc_id}: missing 'tokens'") from None
    ents = []
    for e in raw_ents:
        start, end, label = int(e["start"]), int(e["end"]), str(e["type"])
        if not 0 <= start < end <= len(words):
            raise DataIntegrityError(
                f"document {doc_id}: entity span [{start},{end}) invalid for {len(words)} tokens")
        if spec is not None and label not in spec.entity_labels:
            raise DataIntegrityError(f"document {doc_id}: unknown entity label {label!r}")
        ents.append(EntitySpan(start, end, label))
    triples = []
    for r in raw_rels:
        head, tail, label = int(r["head"]), int(r["tail"]), str(r["type"])
        for which, idx in (("head", head), ("tail", tail)):
            if not 0 <= idx < len(ents):
                raise DataIntegrityError(
                    f"document {doc_id}: relation {which} references entity {idx} "
                    f"but only {len(ents)} entities exist")
        if head == tail:
            raise DataIntegrityError(f"document {doc_id}: self-loop relation on entity {head}")
        if spec is not None and label not in spec.relation_labels:
            raise DataIntegrityError(f"document {doc_id}: unknown relation label {label!r}")
        triples.append(RelationTriple(head, tail, label))
    return Document(id=doc_id, words=words, text=str(obj.get("text", "")), entities=ents,
                    triples=triples, kind="re")


def parse_json_triples(records, spec: Optional[DatasetSpec] = None) -> List[Document]:
    if not isinstance(records, list):
        raise FormatError("canonical JSON must be an array of documents")
    return [_document(obj, pos, spec) for pos, obj in enumerate(records)]


def read_json_triples(path, spec: Optional[DatasetSpec] = None) -> List[Document]:
    try:
        records = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None
    return parse_json_triples(records, spec)


def to_records(docs) -> list:
    return [
        {
            "id": d.id,
            "text": d.text,
            "tokens": list(d.words),
            "entities": [{"start": e.start, "end": e.end, "type": e.label} for e in d.entities],
            "relations": [{"head": t.head, "tail": t.tail, "type": t.label} for t in d.triples],
        }
        for d in docs
    ]


def write_json_triples(docs, path) -> None:
    Path(path).write_text(json.dumps(to_records(docs), ensure_ascii=False, indent=1), encoding="utf-8")
