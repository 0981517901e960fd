"""Structural checks on head arrays (node 0 is the root)."""
from __future__ import annotations

from typing import Sequence


def is_valid_tree(heads: Sequence[int], single_root: bool = False) -> bool:
    """True iff every non-root node reaches node 0 without revisiting a node.

    With ``single_root`` the root must additionally have exactly one child.
    """
    n = len(heads)
    if n <= 1:
        return not single_root
    state = [0] * n  # 0 unvisited, 1 on current path, 2 known to reach root
    state[0] = 2
    for start in range(1, n):
        path = []
        node = start
        while state[node] == 0:
            state[node] = 1
            path.append(node)
            h = int(heads[node])
            if not 0 <= h < n or h == node:
                return False
            node = h
        if state[node] == 1:
            return False
        for p in path:
            state[p] = 2
    if single_root:
        return sum(1 for i in range(1, n) if int(heads[i]) == 0) == 1
    return True
