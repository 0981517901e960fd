"""Exact-match triple scoring, tagging F1, k-stratified reports and Pearson r.

A predicted triple is correct when head text, relation label and tail text
all match a gold triple. Entity types travel with triples but never take
part in matching. Text is compared case-sensitively after collapsing
whitespace runs to single spaces.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import DegenerateError, UsageError

DEFAULT_BUCKETS: Tuple[Tuple[int, Optional[int]], ...] = ((0, 5), (6, 20), (21, 50), (51, None))


def normalize_text(text: str) -> str:
    return " ".join(str(text).split())


@dataclass(frozen=True)
class Triple:
    head: str
    rel: str
    tail: str
    head_type: Optional[str] = field(default=None, compare=False)
    tail_type: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "head", normalize_text(self.head))
        object.__setattr__(self, "rel", normalize_text(self.rel))
        object.__setattr__(self, "tail", normalize_text(self.tail))

    def to_json(self, with_types: bool = False) -> dict:
        if not with_types:
            return {"head": self.head, "rel": self.rel, "tail": self.tail}
        return {
            "rel": {"type": self.rel},
            "head": {"text": self.head, "type": self.head_type},
            "tail": {"text": self.tail, "type": self.tail_type},
        }


class TripleSet:
    """Set semantics over triples: duplicates collapse, types are ignored."""

    __slots__ = ("_items",)

    def __init__(self, items: Iterable = ()):
        out = {}
        for t in items:
            if not isinstance(t, Triple):
                t = Triple(*t)
            out.setdefault(t, t)
        self._items = out

    def __iter__(self):
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, t) -> bool:
        return t in self._items

    def __and__(self, other: "TripleSet") -> "TripleSet":
        return TripleSet(t for t in self if t in other)

    def __eq__(self, other) -> bool:
        if isinstance(other, TripleSet):
            return self._items.keys() == other._items.keys()
        return NotImplemented

    def __repr__(self) -> str:
        return f"TripleSet({sorted((t.head, t.rel, t.tail) for t in self)})"

    def sorted(self) -> List[Triple]:
        return sorted(self, key=lambda t: (t.head, t.rel, t.tail))

    def to_json(self) -> list:
        return [t.to_json() for t in self.sorted()]

    @classmethod
    def from_json(cls, items) -> "TripleSet":
        out = []
        for it in items:
            if isinstance(it.get("rel"), dict):
                out.append(Triple(it["head"]["text"], it["rel"]["type"], it["tail"]["text"],
                                  it["head"].get("type"), it["tail"].get("type")))
            else:
                out.append(Triple(it["head"], it["rel"], it["tail"]))
        return cls(out)


def prf(tp: int, n_pred: int, n_gold: int) -> Tuple[float, float, float]:
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gold if n_gold else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def document_f1(pred: TripleSet, gold: TripleSet) -> float:
    """Exact F1 of one document; empty-vs-empty scores 1."""
    if not gold and not pred:
        return 1.0
    return prf(len(pred & gold), len(pred), len(gold))[2]


@dataclass
class Stratum:
    lo: int
    hi: Optional[int]
    count: int
    mean_f1: Optional[float]

    @property
    def label(self) -> str:
        return f"{self.lo}+" if self.hi is None else f"{self.lo}-{self.hi}"


@dataclass
class DocScore:
    id: str
    k: int
    f1: float
    tp: int
    n_pred: int
    n_gold: int


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    tp: int
    n_pred: int
    n_gold: int
    per_doc: List[DocScore]
    strata: List[Stratum]
    pearson_r: Optional[float]

    @property
    def per_doc_f1(self) -> List[float]:
        return [d.f1 for d in self.per_doc]

    def to_json(self, per_doc: bool = False) -> dict:
        out = {
            "micro_P": self.precision, "micro_R": self.recall, "micro_F1": self.f1,
            "tp": self.tp, "n_pred": self.n_pred, "n_gold": self.n_gold,
            "pearson_r": self.pearson_r,
            "strata": [{"k": s.label, "count": s.count, "mean_f1": s.mean_f1} for s in self.strata],
        }
        if per_doc:
            out["per_doc"] = [asdict(d) for d in self.per_doc]
        return out

    def to_csv(self, per_doc: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["micro_P", "micro_R", "micro_F1", "pearson_r"])
        w.writerow([f"{self.precision:.4f}", f"{self.recall:.4f}", f"{self.f1:.4f}",
                    "" if self.pearson_r is None else f"{self.pearson_r:.4f}"])
        w.writerow([])
        w.writerow(["k_bucket", "count", "mean_f1"])
        for s in self.strata:
            w.writerow([s.label, s.count, "" if s.mean_f1 is None else f"{s.mean_f1:.4f}"])
        if per_doc:
            w.writerow([])
            w.writerow(["id", "k", "f1"])
            for d in self.per_doc:
                w.writerow([d.id, d.k, f"{d.f1:.4f}"])
        return buf.getvalue()

    def to_text(self, per_doc: bool = False) -> str:
        r = "n/a" if self.pearson_r is None else f"{self.pearson_r:+.3f}"
        lines = [
            f"micro P   {self.precision:.3f}",
            f"micro R   {self.recall:.3f}",
            f"micro F1  {self.f1:.3f}",
            f"pearson r (k vs doc F1)  {r}",
            "",
            f"{'k':>8}  {'docs':>6}  {'mean F1':>8}",
        ]
        for s in self.strata:
            mean = "" if s.mean_f1 is None else f"{s.mean_f1:.3f}"
            lines.append(f"{s.label:>8}  {s.count:>6}  {mean:>8}")
        if per_doc:
            lines += ["", f"{'id':<20} {'k':>4} {'F1':>6}"]
            lines += [f"{d.id:<20} {d.k:>4} {d.f1:>6.3f}" for d in self.per_doc]
        return "\n".join(lines) + "\n"


def _align(pred, gold) -> List[Tuple[str, TripleSet, TripleSet]]:
    if isinstance(pred, Mapping) and isinstance(gold, Mapping):
        if set(pred) != set(gold):
            missing = sorted(set(gold) - set(pred))[:3]
            extra = sorted(set(pred) - set(gold))[:3]
            raise UsageError(f"prediction/gold ids differ (missing {missing}, unexpected {extra})")
        return [(i, pred[i], gold[i]) for i in gold]
    pred, gold = list(pred), list(gold)
    if len(pred) != len(gold):
        raise UsageError(f"{len(pred)} predicted documents vs {len(gold)} gold documents")
    return [(str(n), p, g) for n, (p, g) in enumerate(zip(pred, gold))]


def exact_micro_f1(pred, gold, ks: Optional[Mapping[str, int]] = None,
                   buckets=DEFAULT_BUCKETS) -> EvalReport:
    """Score aligned predictions. ``pred``/``gold`` are either id->TripleSet
    mappings with identical keys or equal-length sequences of TripleSets.
    ``ks`` overrides the per-document relation count (defaults to the gold
    set size)."""
    docs = []
    tp = n_pred = n_gold = 0
    for doc_id, p, g in _align(pred, gold):
        p, g = _as_set(p), _as_set(g)
        hit = len(p & g)
        tp, n_pred, n_gold = tp + hit, n_pred + len(p), n_gold + len(g)
        k = ks[doc_id] if ks is not None else len(g)
        docs.append(DocScore(doc_id, k, document_f1(p, g), hit, len(p), len(g)))
    precision, recall, f1 = prf(tp, n_pred, n_gold)
    f1s, kvals = [d.f1 for d in docs], [d.k for d in docs]
    try:
        r = pearson_r(kvals, f1s)
    except (DegenerateError, UsageError):
        r = None
    strata = stratified_report(f1s, kvals, buckets) if docs else []
    return EvalReport(precision, recall, f1, tp, n_pred, n_gold, docs, strata, r)


def _as_set(x) -> TripleSet:
    return x if isinstance(x, TripleSet) else TripleSet(x)


def tagging_micro_f1(pred_tags: Sequence, gold_tags: Sequence, outside: str = "O"
                     ) -> Tuple[float, float, float]:
    """Token-level micro P/R/F1 over tags other than ``outside``.

    Accepts flat tag sequences or sequences of per-document sequences.
    """
    if len(pred_tags) != len(gold_tags):
        raise UsageError(f"tag sequences differ in length: {len(pred_tags)} vs {len(gold_tags)}")
    if pred_tags and isinstance(pred_tags[0], (list, tuple)):
        flat_p, flat_g = [], []
        for p, g in zip(pred_tags, gold_tags):
            if len(p) != len(g):
                raise UsageError(f"tag sequences differ in length: {len(p)} vs {len(g)}")
            flat_p += list(p)
            flat_g += list(g)
        pred_tags, gold_tags = flat_p, flat_g
    tp = sum(1 for p, g in zip(pred_tags, gold_tags) if p == g and g != outside)
    n_pred = sum(1 for p in pred_tags if p != outside)
    n_gold = sum(1 for g in gold_tags if g != outside)
    return prf(tp, n_pred, n_gold)


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation; raises ``DegenerateError`` on constant input."""
    if len(x) != len(y) or len(x) < 2:
        raise UsageError("pearson_r needs two equal-length series of length >= 2")
    n = len(x)
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    dx = [a - mx for a in x]
    dy = [b - my for b in y]
    sxx = math.fsum(a * a for a in dx)
    syy = math.fsum(b * b for b in dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateError("pearson_r is undefined for a constant series")
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    return max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))


def stratified_report(f1s: Sequence[float], ks: Sequence[int],
                      buckets=DEFAULT_BUCKETS) -> List[Stratum]:
    """Document count and mean F1 per k bucket (``hi=None`` is open-ended)."""
    if len(f1s) != len(ks):
        raise UsageError("stratified_report needs one k per F1 value")
    groups: Dict[int, List[float]] = {b: [] for b in range(len(buckets))}
    for f, k in zip(f1s, ks):
        for b, (lo, hi) in enumerate(buckets):
            if k >= lo and (hi is None or k <= hi):
                groups[b].append(f)
                break
        else:
            raise UsageError(f"k={k} is not covered by buckets {buckets}")
    return [
        Stratum(lo, hi, len(groups[b]), math.fsum(groups[b]) / len(groups[b]) if groups[b] else None)
        for b, (lo, hi) in enumerate(buckets)
    ]
