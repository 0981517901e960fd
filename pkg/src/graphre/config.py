"""Run configuration: TOML file with one table per concern, plus overrides.

Every key is validated (known name, expected type) before any work starts.
Empty strings and zero stand in for "unset" where TOML has no null.
"""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import tomli_w

from .data import (DatasetSpec, Document, drop_relation_label, filter_min_relations,
                   generate_toy_corpus, load_documents, toy_spec)
from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class DataSection:
    name: str = "dataset"
    format: str = "json-triples"
    train: str = ""
    dev: str = ""
    test: str = ""
    entity_labels: List[str] = field(default_factory=list)
    relation_labels: List[str] = field(default_factory=list)
    tree_structured: bool = False
    oracle_tags: bool = False
    anchor: str = "last"
    min_relations: int = 0
    drop_relation: str = ""


@dataclass
class ToySection:
    enabled: bool = False
    n_train: int = 500
    n_dev: int = 100
    n_test: int = 0
    seed: int = 1
    min_words: int = 6
    max_words: int = 12


@dataclass
class EmbeddingSection:
    kind: str = "hash-random"
    d_f: int = 768
    path: str = ""


@dataclass
class ModelSection:
    l_psi: int = 1
    l_phi: int = 0
    d_h: int = 300
    d_tag: int = 100
    d_psi: int = 300
    d_edge: int = 256
    d_rel: int = 128
    top_k: int = 3


@dataclass
class TrainingSection:
    lr: float = 1e-3
    batch_size: int = 8
    max_steps: int = 3000
    eval_every: int = 500
    lambda_tag: float = 0.1
    lambda_parse: float = 1.0
    weight_decay: float = 0.0
    clip_norm: float = 0.0


@dataclass
class DecodeSection:
    mode: str = "auto"
    scale: float = 10.0


@dataclass
class RunSection:
    seeds: List[int] = field(default_factory=lambda: [0])
    out_dir: str = "runs"


SECTIONS = {
    "data": DataSection, "toy": ToySection, "embeddings": EmbeddingSection,
    "model": ModelSection, "training": TrainingSection, "decode": DecodeSection,
    "run": RunSection,
}


@dataclass
class RunConfig:
    data: DataSection = field(default_factory=DataSection)
    toy: ToySection = field(default_factory=ToySection)
    embeddings: EmbeddingSection = field(default_factory=EmbeddingSection)
    model: ModelSection = field(default_factory=ModelSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    decode: DecodeSection = field(default_factory=DecodeSection)
    run: RunSection = field(default_factory=RunSection)

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        return {name: asdict(getattr(self, name)) for name in SECTIONS}

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def dataset_spec(self, docs: Optional[List[Document]] = None) -> DatasetSpec:
        if self.toy.enabled:
            return toy_spec(self.data.name if self.data.name != "dataset" else "toy")
        d = self.data
        if d.entity_labels and d.relation_labels:
            return DatasetSpec(d.name, d.format, tuple(d.entity_labels), tuple(d.relation_labels),
                               d.tree_structured, d.oracle_tags, d.anchor)
        if not docs:
            raise ConfigError("label sets missing from [data] and no documents to infer them from")
        kw = dict(oracle_tags=d.oracle_tags, anchor=d.anchor)
        if d.format == "conllu" or d.tree_structured:
            kw["tree_structured"] = d.tree_structured or d.format == "conllu"
        return DatasetSpec.from_documents(d.name, docs, **kw)

    def load_split(self, split: str, spec: Optional[DatasetSpec] = None) -> List[Document]:
        """Documents for ``train``/``dev``/``test``; empty when the split is unset."""
        if self.toy.enabled:
            t = self.toy
            n = {"train": t.n_train, "dev": t.n_dev, "test": t.n_test}[split]
            offset = {"train": 0, "dev": 1, "test": 2}[split]
            return generate_toy_corpus(n, seed=t.seed + offset, min_words=t.min_words,
                                       max_words=t.max_words, prefix=split) if n else []
        path = getattr(self.data, split)
        if not path:
            return []
        docs = load_documents(path, spec)
        if self.data.drop_relation:
            docs = drop_relation_label(docs, self.data.drop_relation)
        if self.data.min_relations:
            docs = filter_min_relations(docs, self.data.min_relations)
        return docs


def _check_value(section: str, key: str, value, default):
    where = f"[{section}].{key}"
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, list):
        ok = isinstance(value, list)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{where}: expected {type(default).__name__}, got {value!r}")
    return value


def config_from_dict(raw: Mapping[str, Any]) -> RunConfig:
    cfg = RunConfig()
    for section, values in raw.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section [{section}]; known: {sorted(SECTIONS)}")
        if not isinstance(values, Mapping):
            raise ConfigError(f"[{section}] must be a table")
        target = getattr(cfg, section)
        known = {f.name for f in fields(target)}
        for key, value in values.items():
            if key not in known:
                raise ConfigError(f"unknown key [{section}].{key}; known: {sorted(known)}")
            setattr(target, key, _check_value(section, key, value, getattr(target, key)))
    validate(cfg)
    return cfg


def parse_override(text: str):
    """``section.key=value`` with a TOML literal value (bare words become strings)."""
    if "=" not in text or "." not in text.split("=", 1)[0]:
        raise ConfigError(f"override must look like section.key=value, got {text!r}")
    lhs, rhs = text.split("=", 1)
    section, key = lhs.strip().split(".", 1)
    try:
        value = tomllib.loads(f"v = {rhs.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = rhs.strip()
    return section, key, value


def load_config(path=None, overrides=()) -> RunConfig:
    raw: Dict[str, Dict[str, Any]] = {}
    if path is not None:
        try:
            raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: invalid TOML ({exc})") from None
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
    for item in overrides:
        section, key, value = parse_override(item) if isinstance(item, str) else item
        raw.setdefault(section, {})[key] = value
    return config_from_dict(raw)


def validate(cfg: RunConfig) -> None:
    d, m, t = cfg.data, cfg.model, cfg.training
    if d.format not in ("conllu", "json-triples"):
        raise ConfigError(f"[data].format must be conllu or json-triples, got {d.format!r}")
    if d.anchor not in ("first", "last"):
        raise ConfigError(f"[data].anchor must be first or last, got {d.anchor!r}")
    if d.min_relations < 0:
        raise ConfigError("[data].min_relations must be >= 0")
    if cfg.embeddings.kind not in ("hash-random", "precomputed", "trainable-lookup"):
        raise ConfigError(f"[embeddings].kind {cfg.embeddings.kind!r} is not a known provider")
    if cfg.embeddings.d_f <= 0:
        raise ConfigError("[embeddings].d_f must be positive")
    if cfg.embeddings.kind == "precomputed" and not cfg.embeddings.path:
        raise ConfigError("[embeddings].path is required for precomputed embeddings")
    if m.l_psi < 0 or m.l_phi < 0 or m.top_k < 1:
        raise ConfigError("[model]: l_psi, l_phi >= 0 and top_k >= 1 required")
    for name in ("d_h", "d_tag", "d_psi", "d_edge", "d_rel"):
        if getattr(m, name) <= 0:
            raise ConfigError(f"[model].{name} must be positive")
    if t.max_steps <= 0 or t.eval_every <= 0 or t.max_steps % t.eval_every:
        raise ConfigError("[training]: eval_every must be positive and divide max_steps")
    if t.clip_norm < 0:
        raise ConfigError("[training].clip_norm must be >= 0 (0 disables clipping)")
    if cfg.decode.mode not in ("auto", "greedy", "mst"):
        raise ConfigError(f"[decode].mode must be auto, greedy or mst, got {cfg.decode.mode!r}")
    if cfg.decode.scale <= 0:
        raise ConfigError("[decode].scale must be positive")
    if not cfg.run.seeds or not all(isinstance(s, int) for s in cfg.run.seeds):
        raise ConfigError("[run].seeds must be a non-empty list of integers")
