# fragmentation.py
"""
Box-and-separator page segmentation.

A fragment is split along separators: gaps wider than min_separator_px in the
projection of its blocks (visible member nodes) onto the y axis, or, when no
horizontal gap exists, onto the x axis. Blocks that enclose every other block
(page wrappers such as html, body, a table around its rows) are set aside and
stay with the parent fragment; the search is retried without them until a
separator appears or nothing more can be set aside.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple

from pagefrag.config import FragConfig
from pagefrag.errors import NodeNotInFragment
from pagefrag.raster import BBox, Raster
from pagefrag.snapshot import StateSnapshot

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class Fragment:
    frag_id: int
    nodes: frozenset
    bbox: Optional[BBox]
    snapshot: StateSnapshot = field(repr=False)
    parent: Optional["Fragment"] = field(default=None, repr=False)
    children: List["Fragment"] = field(default_factory=list, repr=False)
    useful: bool = True
    depth: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def key(self) -> Tuple[str, int]:
        """(stateId, fragId): identity inside a model."""
        return (self.snapshot.state_id, self.frag_id)

    @property
    def ident(self) -> Tuple[str, int]:
        """(snapshot digest, fragId): identity by content, used for memoized comparisons."""
        return (self.snapshot.uid, self.frag_id)

    @property
    def label(self) -> str:
        return f"{self.snapshot.state_id}#F{self.frag_id}"

    @property
    def area(self) -> int:
        return 0 if self.bbox is None else self.bbox[2] * self.bbox[3]

    @property
    def crop(self) -> Raster:
        return self.snapshot.raster.crop(self.bbox)

    @property
    def useful_children(self) -> List["Fragment"]:
        return [c for c in self.children if c.useful]

    def walk(self) -> Iterator["Fragment"]:
        """Pre-order over this fragment and every descendant."""
        stack = [self]
        while stack:
            f = stack.pop()
            yield f
            stack.extend(reversed(f.children))

    def useful_fragments(self) -> List["Fragment"]:
        return [f for f in self.walk() if f.useful]

    def useful_descendants(self) -> List["Fragment"]:
        return [f for f in self.walk() if f.useful and f is not self]

    def find(self, frag_id: int) -> Optional["Fragment"]:
        for f in self.walk():
            if f.frag_id == frag_id:
                return f
        return None

    def to_dict(self) -> dict:
        return {
            "fragId": self.frag_id,
            "nodes": sorted(self.nodes),
            "bbox": list(self.bbox) if self.bbox is not None else None,
            "useful": self.useful,
            "children": [c.to_dict() for c in self.children],
        }


def _union(boxes: Sequence[BBox]) -> Optional[BBox]:
    if not boxes:
        return None
    x0 = min(b[0] for b in boxes)
    y0 = min(b[1] for b in boxes)
    x1 = max(b[0] + b[2] for b in boxes)
    y1 = max(b[1] + b[3] for b in boxes)
    return (x0, y0, x1 - x0, y1 - y0)


def _contains(outer: BBox, inner: BBox) -> bool:
    return (outer[0] <= inner[0] and outer[1] <= inner[1]
            and outer[0] + outer[2] >= inner[0] + inner[2]
            and outer[1] + outer[3] >= inner[1] + inner[3])


def _bands(boxes: Dict[int, BBox], axis: int, min_gap: int) -> List[Tuple[int, int]]:
    """Merged extents along `axis` (0 = x, 1 = y) separated by gaps wider than min_gap."""
    spans = sorted((b[axis], b[axis] + b[axis + 2]) for b in boxes.values())
    bands = [list(spans[0])]
    for lo, hi in spans[1:]:
        if lo - bands[-1][1] > min_gap:
            bands.append([lo, hi])
        else:
            bands[-1][1] = max(bands[-1][1], hi)
    return [(lo, hi) for lo, hi in bands]


def _find_separators(boxes: Dict[int, BBox], min_gap: int):
    """Returns (axis, bands, wrappers) or None when the blocks admit no separator."""
    wrappers: Set[int] = set()
    while True:
        cand = {nid: b for nid, b in boxes.items() if nid not in wrappers}
        if len(cand) < 2:
            return None
        for axis in (1, 0):
            bands = _bands(cand, axis, min_gap)
            if len(bands) >= 2:
                return axis, bands, wrappers
        union = _union(list(cand.values()))
        enclosing = {nid for nid, b in cand.items() if _contains(b, union)}
        if not enclosing:
            return None
        wrappers |= enclosing


def is_useful(f: Fragment, cfg: FragConfig) -> bool:
    """Enough element nodes and enough area to be compared on its own."""
    return len(f.nodes) >= cfg.min_nodes and f.area >= cfg.min_area


def _split(snap: StateSnapshot, members: List[int], cfg: FragConfig) -> List[List[int]]:
    dom = snap.dom
    boxes = {nid: dom.nodes[nid].bbox for nid in members if dom.nodes[nid].visible}
    found = _find_separators(boxes, cfg.min_separator_px) if boxes else None
    if found is None:
        return []
    axis, bands, wrappers = found
    assigned: Dict[int, int] = {}
    for nid in members:
        if nid in wrappers:
            continue
        if nid in boxes:
            b = boxes[nid]
            center = b[axis] + b[axis + 2] / 2.0
            for k, (lo, hi) in enumerate(bands):
                if lo <= center <= hi:
                    assigned[nid] = k
                    break
        else:
            parent = dom.parent[nid]
            if parent in assigned:
                assigned[nid] = assigned[parent]
    groups: List[List[int]] = [[] for _ in bands]
    for nid in members:
        if nid in assigned:
            groups[assigned[nid]].append(nid)
    return [g for g in groups if g]


def _build(snap, members, parent, cfg, counter, depth) -> Fragment:
    dom = snap.dom
    visible_boxes = [dom.nodes[n].bbox for n in members if dom.nodes[n].visible]
    frag = Fragment(
        frag_id=next(counter),
        nodes=frozenset(members),
        bbox=_union(visible_boxes),
        snapshot=snap,
        parent=parent,
        depth=depth,
    )
    if parent is not None:
        frag.useful = is_useful(frag, cfg)
        if not frag.useful:
            return frag
    groups = _split(snap, members, cfg)
    if len(groups) >= 2:
        for group in groups:
            frag.children.append(_build(snap, group, frag, cfg, counter, depth + 1))
    return frag


def fragment(snap: StateSnapshot, cfg: Optional[FragConfig] = None) -> Fragment:
    """
    Build the fragment hierarchy of a snapshot.

    Fragment ids are assigned in pre-order starting at 0 for the root. The
    root holds every DOM node and is always useful.
    """
    cfg = cfg or FragConfig()
    root = _build(snap, list(snap.dom.order), None, cfg, itertools.count(), 0)
    useful = sum(1 for f in root.walk() if f.useful)
    logger.debug(f"[fragmented] {snap.state_id}: {useful} useful fragment(s)")
    return root


def closest(nid: int, root: Fragment) -> Fragment:
    """Deepest useful fragment under (and including) root whose node set holds nid."""
    if nid not in root.nodes:
        raise NodeNotInFragment(f"node {nid} is not in fragment {root.label}")
    current = root
    while True:
        for child in current.useful_children:
            if nid in child.nodes:
                current = child
                break
        else:
            return current


def anchor_node(f: Fragment) -> int:
    """DOM node relative locators inside f are written against."""
    return f.snapshot.dom.lowest_common_ancestor(sorted(f.nodes))


def relative_locator(nid: int, f: Fragment) -> str:
    if nid not in f.nodes:
        raise NodeNotInFragment(f"node {nid} is not in fragment {f.label}")
    return f.snapshot.dom.relative_xpath(anchor_node(f), nid)
