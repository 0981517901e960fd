"""Per-dataset relation-count statistics."""
from __future__ import annotations

import csv
import io
from typing import Iterable, List, Optional, Sequence, Tuple

from ..errors import UsageError
from .documents import Document, StatsRow

CSV_HEADER = ("dataset", "min", "mean", "max", "pct_k_le_5", "avg_chars")


def complexity_stats(docs: Sequence[Document]) -> StatsRow:
    if not docs:
        raise UsageError("complexity_stats needs at least one document")
    ks = [d.k for d in docs]
    n = len(ks)
    return StatsRow(
        min_k=min(ks),
        mean_k=sum(ks) / n,
        max_k=max(ks),
        pct_k_le_5=100.0 * sum(1 for k in ks if k <= 5) / n,
        avg_chars=sum(len(d.text) for d in docs) / n,
        n_docs=n,
    )


def filter_min_relations(docs: Iterable[Document], min_k: Optional[int]) -> List[Document]:
    """Keep documents with at least ``min_k`` relations (no-op when None)."""
    docs = list(docs)
    return docs if min_k is None else [d for d in docs if d.k >= min_k]


def _cells(name: str, row: StatsRow) -> Tuple[str, ...]:
    return (name, str(row.min_k), f"{row.mean_k:.2f}", str(row.max_k),
            f"{row.pct_k_le_5:.2f}", f"{row.avg_chars:.2f}")


def format_stats_csv(rows: Sequence[Tuple[str, StatsRow]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for name, row in rows:
        w.writerow(_cells(name, row))
    return buf.getvalue()


def format_stats_table(rows: Sequence[Tuple[str, StatsRow]]) -> str:
    header = ("Dataset", "Min", "Mean", "Max", "k<=5 %", "Avg. chars")
    body = [_cells(name, row) for name, row in rows]
    widths = [max(len(r[c]) for r in [header] + body) for c in range(len(header))]
    lines = []
    for r in [header] + body:
        lines.append("  ".join(cell.ljust(w) if c == 0 else cell.rjust(w)
                               for c, (cell, w) in enumerate(zip(r, widths))))
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines) + "\n"
