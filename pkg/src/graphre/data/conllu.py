"""CoNLL-U treebank reader.

xPOS (column 5) becomes the word tag and the dependency relation
(column 8) the relation label. Multiword-token ranges and empty nodes are
skipped.
"""
from __future__ import annotations

from pathlib import Path
from typing import List

from ..errors import DataIntegrityError, FormatError
from .documents import Document, RelationTriple


def _flush(rows, comments, path, count, line_no) -> Document:
    words = [r[1] for r in rows]
    tags = [r[4] for r in rows]
    n = len(rows)
    triples, roots = [], []
    for k, r in enumerate(rows):
        if r[0] != str(k + 1):
            raise FormatError(f"{path}:{line_no}: word ids must run 1..n, found {r[0]!r} at position {k + 1}")
        try:
            head = int(r[6])
        except ValueError:
            raise FormatError(f"{path}:{line_no}: non-integer head {r[6]!r}") from None
        if not 0 <= head <= n:
            raise DataIntegrityError(f"{path}:{line_no}: head {head} out of range for {n} words")
        if head == k + 1:
            raise DataIntegrityError(f"{path}:{line_no}: word {k + 1} heads itself")
        if head == 0:
            roots.append((k, r[7]))
        else:
            triples.append(RelationTriple(head - 1, k, r[7]))
    doc_id = comments.get("sent_id") or f"{Path(path).stem}-{count}"
    return Document(id=doc_id, words=words, text=comments.get("text", ""), triples=triples,
                    word_tags=tags, roots=roots, kind="dep")


def read_conllu(path) -> List[Document]:
    docs: List[Document] = []
    rows, comments = [], {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                if rows:
                    docs.append(_flush(rows, comments, path, len(docs), line_no))
                rows, comments = [], {}
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition("=")
                if sep:
                    comments[key.strip()] = value.strip()
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise FormatError(f"{path}:{line_no}: expected 10 tab-separated columns, got {len(cols)}")
            if "-" in cols[0] or "." in cols[0]:
                continue
            rows.append(cols)
        if rows:
            docs.append(_flush(rows, comments, path, len(docs), line_no))
    return docs


def write_conllu(docs, path) -> None:
    """Write dependency documents back out (lemma/UPOS/feats left blank)."""
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            heads = {t.tail: (t.head + 1, t.label) for t in d.triples}
            heads.update({w: (0, lab) for w, lab in d.roots})
            fh.write(f"# sent_id = {d.id}\n# text = {d.text}\n")
            for k, w in enumerate(d.words):
                h, lab = heads[k]
                tag = d.word_tags[k] if d.word_tags else "_"
                fh.write(f"{k + 1}\t{w}\t_\t_\t{tag}\t_\t{h}\t{lab}\t_\t_\n")
            fh.write("\n")
