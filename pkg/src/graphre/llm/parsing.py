"""Tolerant parsing of model completions into triple sets."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

from ..evaluation import Triple, TripleSet

logger = logging.getLogger(__name__)

PREFIX = "triple_list:"


class ParseStatus(str, Enum):
    OK = "ok"
    PARTIAL = "partial"
    NO_JSON = "no-json"


@dataclass
class ParsedCompletion:
    triples: TripleSet
    status: ParseStatus
    warnings: List[str] = field(default_factory=list)


def _balanced(text: str, start: int, open_ch: str, close_ch: str) -> Optional[int]:
    """Index one past the bracket matching ``text[start]``; string-literal aware."""
    depth = 0
    in_str = esc = False
    for i in range(start, len(text)):
        c = text[i]
        if in_str:
            if esc:
                esc = False
            elif c == "\\":
                esc = True
            elif c == '"':
                in_str = False
        elif c == '"':
            in_str = True
        elif c == open_ch:
            depth += 1
        elif c == close_ch:
            depth -= 1
            if depth == 0:
                return i + 1
    return None


def _objects(fragment: str) -> List[str]:
    """Top-level ``{...}`` chunks inside an array body, even if the array never closes."""
    out, i = [], 0
    while True:
        i = fragment.find("{", i)
        if i < 0:
            return out
        end = _balanced(fragment, i, "{", "}")
        if end is None:
            return out
        out.append(fragment[i:end])
        i = end


def _to_triple(item) -> Tuple[Optional[Triple], str]:
    if not isinstance(item, dict):
        return None, f"item is {type(item).__name__}, not an object"
    try:
        rel, head, tail = item["rel"], item["head"], item["tail"]
        if isinstance(rel, dict):
            return Triple(head["text"], rel["type"], tail["text"], head.get("type"), tail.get("type")), ""
        if all(isinstance(x, str) for x in (rel, head, tail)):
            return Triple(head, rel, tail), ""
        return None, "rel/head/tail have an unexpected shape"
    except (KeyError, TypeError) as exc:
        return None, f"missing key {exc}"


def parse_completion(text: str, strict: bool = False) -> ParsedCompletion:
    """Locate the first JSON array (after an optional ``triple_list:``) and
    turn its objects into triples.

    Non-strict mode tolerates prose around the array and salvages well-formed
    objects from a broken array. ``strict=True`` demands that the text be
    exactly ``[triple_list:] <valid JSON array> [</s>]``.
    """
    warnings: List[str] = []
    body = text.strip()
    if body.endswith("</s>"):
        body = body[:-4].rstrip()
    pos = body.find(PREFIX)
    search_from = pos + len(PREFIX) if pos >= 0 else 0
    start = body.find("[", search_from)
    if start < 0 or (strict and body[search_from:start].strip()):
        return ParsedCompletion(TripleSet(), ParseStatus.NO_JSON, ["no JSON array found"])
    if strict and pos > 0 and body[:pos].strip():
        return ParsedCompletion(TripleSet(), ParseStatus.NO_JSON, ["text before triple_list"])
    end = _balanced(body, start, "[", "]")
    items = None
    if end is not None:
        try:
            items = json.loads(body[start:end])
        except json.JSONDecodeError as exc:
            warnings.append(f"array is not valid JSON ({exc.msg})")
        if strict and body[end:].strip():
            return ParsedCompletion(TripleSet(), ParseStatus.NO_JSON, ["text after the JSON array"])
    else:
        warnings.append("array is never closed")
    if items is None:
        if strict:
            return ParsedCompletion(TripleSet(), ParseStatus.NO_JSON, warnings)
        items = []
        for chunk in _objects(body[start + 1:end]):
            try:
                items.append(json.loads(chunk))
            except json.JSONDecodeError:
                warnings.append(f"dropped unparsable object {chunk[:40]!r}")
        if not items and not warnings:
            return ParsedCompletion(TripleSet(), ParseStatus.NO_JSON, ["no JSON objects found"])
    if not isinstance(items, list):
        return ParsedCompletion(TripleSet(), ParseStatus.NO_JSON, ["JSON value is not a list"])
    triples = []
    for n, item in enumerate(items):
        t, why = _to_triple(item)
        if t is None:
            warnings.append(f"item {n} skipped: {why}")
            logger.warning("completion item %d skipped: %s", n, why)
        else:
            triples.append(t)
    status = ParseStatus.PARTIAL if warnings else ParseStatus.OK
    return ParsedCompletion(TripleSet(triples), status, warnings)
