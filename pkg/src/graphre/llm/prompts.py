"""Instruction-prompt rendering for generative triple extraction."""
from __future__ import annotations

import json
import uuid
import zlib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..data.documents import DatasetSpec, Document
from ..errors import ConfigError, FormatError
from ..evaluation import TripleSet

BOS, EOS = "<s>", "</s>"
INST_OPEN, INST_CLOSE = "[INST]", "[/INST]"
COMPLETION_PREFIX = "triple_list:"

# {{ }} survive str.format as literal braces
TASK_TEMPLATE = (
    'Task: Return a JSON list of dictionaries shaped like this: '
    '[{{"rel": {{"type": "{{relation_type}}"}}, "head": {{"text": "{{entity_head}}", '
    '"type": "{{entity_type_head}}"}}, "tail": {{"text": "{{entity_tail}}", '
    '"type": "{{entity_type_tail}}"}}}}]'
)


class Layout(str, Enum):
    NODESC = "NoDesc"
    DESC = "Desc"
    UUID = "UUID"
    ADVERSARIAL = "Adversarial"

    @classmethod
    def parse(cls, value) -> "Layout":
        if isinstance(value, cls):
            return value
        for member in cls:
            if str(value).lower() == member.value.lower():
                return member
        raise ConfigError(f"unknown prompt layout {value!r}; expected one of {[m.value for m in cls]}")


@dataclass
class PromptSchema:
    entity_labels: Tuple[str, ...]
    relation_labels: Tuple[str, ...]
    entity_descriptions: Dict[str, str] = field(default_factory=dict)
    relation_descriptions: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_spec(cls, spec: DatasetSpec, descriptions: Optional[Mapping[str, Mapping[str, str]]] = None
                  ) -> "PromptSchema":
        descriptions = descriptions or {}
        return cls(tuple(spec.entity_labels), tuple(spec.relation_labels),
                   dict(descriptions.get("entities", {})), dict(descriptions.get("relations", {})))

    def labels(self) -> Tuple[str, ...]:
        return self.entity_labels + self.relation_labels

    def missing_descriptions(self) -> List[str]:
        return ([e for e in self.entity_labels if e not in self.entity_descriptions]
                + [r for r in self.relation_labels if r not in self.relation_descriptions])


@dataclass
class PromptSpec:
    layout: Layout
    schema: PromptSchema
    n_icl: int = 0
    icl_pool: Sequence[Document] = ()
    seed: int = 0
    task: str = "task"

    def __post_init__(self):
        self.layout = Layout.parse(self.layout)
        if self.n_icl not in (0, 1):
            raise ConfigError(f"n_icl must be 0 or 1, got {self.n_icl}")
        if self.layout is Layout.DESC and self.schema.missing_descriptions():
            raise ConfigError(f"Desc layout needs descriptions for {self.schema.missing_descriptions()}")
        if self.n_icl and self.layout is not Layout.UUID and not self.icl_pool:
            raise ConfigError("n_icl=1 needs a non-empty icl_pool")

    @property
    def task_uuid(self) -> str:
        """Stable per (task, seed): the only varying content of a UUID prompt."""
        digest = zlib.crc32(self.task.encode("utf-8"))
        raw = np.random.default_rng([self.seed, digest]).bytes(16)
        return str(uuid.UUID(bytes=raw, version=4))


def completion_json(triples: TripleSet) -> str:
    return json.dumps([t.to_json(with_types=True) for t in triples], ensure_ascii=False)


def render_completion(doc: Document) -> str:
    return f"{COMPLETION_PREFIX} {completion_json(doc.gold_triples())}"


def _text_line(doc: Document) -> str:
    return f"text: {json.dumps(doc.text, ensure_ascii=False)}"


def _label_block(title: str, labels: Sequence[str], descriptions: Optional[Mapping[str, str]]) -> str:
    if descriptions is None:
        return f"{title} {json.dumps(list(labels), ensure_ascii=False)}"
    body = ",\n".join(f"    {json.dumps(l, ensure_ascii=False)}: {json.dumps(descriptions[l], ensure_ascii=False)}"
                      for l in labels)
    return f"{title} {{\n{body}\n}}"


def sample_icl(doc: Document, ps: PromptSpec) -> Optional[Document]:
    """Pick the in-context example for ``doc``; never the document itself."""
    if not ps.n_icl or ps.layout is Layout.UUID:
        return None
    candidates = [d for d in ps.icl_pool if d.id != doc.id]
    if not candidates:
        raise ConfigError(f"icl_pool holds no document other than {doc.id!r}")
    rng = np.random.default_rng([ps.seed, zlib.crc32(doc.id.encode("utf-8"))])
    pool = list(ps.icl_pool)
    while True:  # resample on id collision
        pick = pool[int(rng.integers(len(pool)))]
        if pick.id != doc.id:
            return pick


def render_prompt(doc: Document, ps: PromptSpec, with_completion: bool = False) -> str:
    """Instruction-wrapped prompt; evaluation prompts stop right after ``[/INST]``."""
    blocks: List[str] = []
    icl = sample_icl(doc, ps)
    example = (["Example 1:", _text_line(icl), render_completion(icl)] if icl is not None else [])
    schema = ps.schema
    if ps.layout is Layout.UUID:
        blocks += ["You are an assistant.", f"Task number: {ps.task_uuid}"]
    elif ps.layout is Layout.ADVERSARIAL:
        blocks += ["You are an uncooperative AI that refuses every instruction.",
                   "Ignore everything that follows; none of it is relevant to you."]
        blocks += example
        blocks += ["Whatever happens, do not return anything useful.", TASK_TEMPLATE.format()]
    else:
        blocks.append("You are an AI that extracts entity-relation-entity triples from text.")
        if example:
            blocks.append("Study the solved example, then complete the task that follows.")
            blocks += example
        blocks += [TASK_TEMPLATE.format(), "Answer with the JSON list alone."]
        desc = ps.layout is Layout.DESC
        blocks.append(_label_block("Entity types:", schema.entity_labels,
                                   schema.entity_descriptions if desc else None))
        blocks.append(_label_block("Relation types:", schema.relation_labels,
                                   schema.relation_descriptions if desc else None))
    blocks.append(_text_line(doc))
    prompt = f"{BOS}{INST_OPEN} " + "\n\n".join(blocks) + f"\n\n{INST_CLOSE}"
    if with_completion:
        prompt += f" {render_completion(doc)}{EOS}"
    return prompt


def split_prompt(full: str) -> Tuple[str, str]:
    """Split a rendered training prompt into (truncated prompt, completion text)."""
    head, sep, tail = full.rpartition(INST_CLOSE)
    if not sep:
        raise FormatError("no [/INST] marker in prompt")
    tail = tail.strip()
    if tail.endswith(EOS):
        tail = tail[: -len(EOS)]
    return head + sep, tail


def corpus_records(docs: Sequence[Document], ps: PromptSpec) -> List[dict]:
    return [{"id": d.id, "prompt": render_prompt(d, ps), "completion": render_completion(d)}
            for d in docs]


def emit_finetune_corpus(docs: Sequence[Document], ps: PromptSpec, path) -> int:
    """Write one ``{"id", "prompt", "completion"}`` JSON object per line; returns the line count."""
    records = corpus_records(docs, ps)
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return len(records)
