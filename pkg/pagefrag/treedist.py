# treedist.py
"""
Ordered tree edit distance (Zhang-Shasha) with edit-mapping recovery.

Unit costs: insert 1, delete 1, rename 1 (0 when labels match). The mapping is
recovered by re-walking the forest-distance tables of every subtree pair the
optimal script passes through.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Hashable, List, Optional, Tuple


@dataclass
class TreeNode:
    """Labeled ordered tree node. `key` identifies the source DOM node (None for synthetic nodes)."""
    label: str
    key: Optional[Hashable] = None
    children: List["TreeNode"] = field(default_factory=list)

    def size(self) -> int:
        count, stack = 0, [self]
        while stack:
            node = stack.pop()
            count += 1
            stack.extend(node.children)
        return count

    def canonical(self) -> str:
        """Serialization that is equal for two trees iff they are isomorphic."""
        parts: List[str] = []
        stack: List[Any] = [self]
        while stack:
            item = stack.pop()
            if isinstance(item, str):
                parts.append(item)
                continue
            parts.append(item.label)
            if item.children:
                parts.append("(")
                stack.append(")")
                last = len(item.children) - 1
                for k, c in enumerate(reversed(item.children)):
                    stack.append(c)
                    if k < last:
                        stack.append(" ")
        return "".join(parts)


@dataclass(frozen=True)
class EditResult:
    distance: int
    mapping: Tuple[Tuple[Hashable, Hashable], ...]
    deleted: Tuple[Hashable, ...]
    inserted: Tuple[Hashable, ...]
    renamed: Tuple[Tuple[Hashable, Hashable], ...]


def _annotate(root: TreeNode) -> Tuple[Tuple[str, ...], Tuple[int, ...], List[Hashable]]:
    """Post-order labels, leftmost-leaf indices and keys (0-based)."""
    labels: List[str] = []
    lmds: List[int] = []
    keys: List[Hashable] = []
    stack: List[Tuple[TreeNode, bool]] = [(root, False)]
    first_leaf: List[int] = []
    while stack:
        node, done = stack.pop()
        if not done:
            stack.append((node, True))
            for c in reversed(node.children):
                stack.append((c, False))
            first_leaf.append(-1)
            continue
        idx = len(labels)
        labels.append(node.label)
        keys.append(node.key)
        lmd = first_leaf.pop()
        lmds.append(idx if lmd == -1 else lmd)
        if first_leaf and first_leaf[-1] == -1:
            first_leaf[-1] = lmds[idx]
    return tuple(labels), tuple(lmds), keys


def _keyroots(lmds: Tuple[int, ...]) -> List[int]:
    highest = {}
    for i, l in enumerate(lmds):
        highest[l] = i
    return sorted(highest.values())


def _forest_table(i: int, j: int, lab1, lmd1, lab2, lmd2, td) -> List[List[int]]:
    li, lj = lmd1[i], lmd2[j]
    m, n = i - li + 2, j - lj + 2
    fd = [[0] * n for _ in range(m)]
    for x in range(1, m):
        fd[x][0] = fd[x - 1][0] + 1
    for y in range(1, n):
        fd[0][y] = fd[0][y - 1] + 1
    for x in range(1, m):
        a = li + x - 1
        for y in range(1, n):
            b = lj + y - 1
            if lmd1[a] == li and lmd2[b] == lj:
                fd[x][y] = min(fd[x - 1][y] + 1, fd[x][y - 1] + 1,
                               fd[x - 1][y - 1] + (lab1[a] != lab2[b]))
                td[a][b] = fd[x][y]
            else:
                p, q = lmd1[a] - li, lmd2[b] - lj
                fd[x][y] = min(fd[x - 1][y] + 1, fd[x][y - 1] + 1, fd[p][q] + td[a][b])
    return fd


@lru_cache(maxsize=4096)
def _solve(lab1, lmd1, lab2, lmd2) -> Tuple[int, Tuple[Tuple[int, int], ...]]:
    n1, n2 = len(lab1), len(lab2)
    td = [[0] * n2 for _ in range(n1)]
    for i in _keyroots(lmd1):
        for j in _keyroots(lmd2):
            _forest_table(i, j, lab1, lmd1, lab2, lmd2, td)

    pairs: List[Tuple[int, int]] = []
    pending = [(n1 - 1, n2 - 1)]
    while pending:
        i, j = pending.pop()
        li, lj = lmd1[i], lmd2[j]
        fd = _forest_table(i, j, lab1, lmd1, lab2, lmd2, td)
        x, y = i - li + 1, j - lj + 1
        while x > 0 or y > 0:
            if x > 0 and fd[x][y] == fd[x - 1][y] + 1:
                x -= 1
            elif y > 0 and fd[x][y] == fd[x][y - 1] + 1:
                y -= 1
            else:
                a, b = li + x - 1, lj + y - 1
                if lmd1[a] == li and lmd2[b] == lj:
                    pairs.append((a, b))
                    x, y = x - 1, y - 1
                else:
                    pending.append((a, b))
                    x, y = lmd1[a] - li, lmd2[b] - lj
    return td[n1 - 1][n2 - 1], tuple(sorted(pairs))


def tree_edit_distance(t1: TreeNode, t2: TreeNode) -> EditResult:
    """Exact unit-cost edit distance between two ordered labeled trees plus an optimal mapping."""
    lab1, lmd1, keys1 = _annotate(t1)
    lab2, lmd2, keys2 = _annotate(t2)
    dist, pairs = _solve(lab1, lmd1, lab2, lmd2)
    mapped1 = {a for a, _ in pairs}
    mapped2 = {b for _, b in pairs}
    return EditResult(
        distance=dist,
        mapping=tuple((keys1[a], keys2[b]) for a, b in pairs),
        deleted=tuple(keys1[a] for a in range(len(lab1)) if a not in mapped1),
        inserted=tuple(keys2[b] for b in range(len(lab2)) if b not in mapped2),
        renamed=tuple((keys1[a], keys2[b]) for a, b in pairs if lab1[a] != lab2[b]),
    )
