# comparison.py
"""
Structural and visual comparators plus fragment classification.

classify() decides the relation between two fragments:

  Clone     pruned DOM trees isomorphic and crops match
  Nd2       pruned DOM trees isomorphic, crops differ (data-only change)
  Nd3       every changed node sits in a child fragment that has a
            near-duplicate among the other side's fragments
  Distinct  otherwise
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import total_ordering
from typing import Dict, List, Optional, Tuple

import numpy as np

from pagefrag.config import CompareConfig
from pagefrag.errors import RecursionDepthExceeded
from pagefrag.fragmentation import Fragment, closest
from pagefrag.raster import Raster
from pagefrag.snapshot import DomTree, StateSnapshot
from pagefrag.treedist import EditResult, TreeNode, tree_edit_distance

logger = logging.getLogger(__name__)

FRAGMENT_ROOT_LABEL = "#fragment"
HIST_BINS = 64


@total_ordering
class ClassLabel(Enum):
    CLONE = "Clone"
    ND2 = "Nd2"
    ND3 = "Nd3"
    DISTINCT = "Distinct"

    @property
    def severity(self) -> int:
        return _SEVERITY[self]

    def __lt__(self, other):
        if not isinstance(other, ClassLabel):
            return NotImplemented
        return self.severity < other.severity

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "ClassLabel":
        return _ALIASES[text.strip().lower()]


_SEVERITY = {ClassLabel.CLONE: 0, ClassLabel.ND2: 1, ClassLabel.ND3: 2, ClassLabel.DISTINCT: 3}
_ALIASES = {
    "clone": ClassLabel.CLONE, "cl": ClassLabel.CLONE,
    "nd2": ClassLabel.ND2, "nd2-data": ClassLabel.ND2,
    "nd3": ClassLabel.ND3, "nd3-struct": ClassLabel.ND3,
    "distinct": ClassLabel.DISTINCT, "di": ClassLabel.DISTINCT,
}

NEAR_CLONE = frozenset({ClassLabel.CLONE, ClassLabel.ND2})


@dataclass(frozen=True)
class NodeDiff:
    """Changed nodes as (side, node id); side 0 is the first fragment, 1 the second."""
    changed: frozenset
    distance: int = 0

    def __bool__(self) -> bool:
        return bool(self.changed)

    def __len__(self) -> int:
        return len(self.changed)


# ============================================================================
# STRUCTURE
# ============================================================================

def prune_tree(dom: DomTree, members) -> TreeNode:
    """
    Induced forest over `members`, tag labels only, under a virtual root.

    A member's parent is its nearest member ancestor; members without one hang
    from the virtual root.
    """
    root = TreeNode(FRAGMENT_ROOT_LABEL, None)
    built: Dict[int, TreeNode] = {}
    for nid in dom.order:
        if nid not in members:
            continue
        node = TreeNode(dom.nodes[nid].tag, nid)
        built[nid] = node
        p = dom.parent[nid]
        while p is not None and p not in members:
            p = dom.parent[p]
        (built[p] if p is not None else root).children.append(node)
    return root


def prune_dom(f: Fragment) -> TreeNode:
    """Pruned DOM of a fragment: text and attributes dropped, tags kept."""
    if "pruned" not in f._cache:
        f._cache["pruned"] = prune_tree(f.snapshot.dom, f.nodes)
    return f._cache["pruned"]


def fragment_shape(f: Fragment) -> str:
    if "shape" not in f._cache:
        f._cache["shape"] = prune_dom(f).canonical()
    return f._cache["shape"]


def page_tree(snap: StateSnapshot) -> TreeNode:
    if "page_tree" not in snap._cache:
        snap._cache["page_tree"] = prune_tree(snap.dom, frozenset(snap.dom.order))
    return snap._cache["page_tree"]


def page_shape(snap: StateSnapshot) -> str:
    if "page_shape" not in snap._cache:
        snap._cache["page_shape"] = page_tree(snap).canonical()
    return snap._cache["page_shape"]


def treediff(f1: Fragment, f2: Fragment) -> NodeDiff:
    """Nodes inserted, deleted or renamed by a minimum-cost edit mapping of the pruned trees."""
    if fragment_shape(f1) == fragment_shape(f2):
        return NodeDiff(frozenset(), 0)
    result: EditResult = tree_edit_distance(prune_dom(f1), prune_dom(f2))
    changed = {(0, k) for k in result.deleted if k is not None}
    changed |= {(1, k) for k in result.inserted if k is not None}
    for a, b in result.renamed:
        if a is not None:
            changed.add((0, a))
        if b is not None:
            changed.add((1, b))
    return NodeDiff(frozenset(changed), result.distance)


# ============================================================================
# VISUAL
# ============================================================================

def histogram_signature(raster: Raster) -> np.ndarray:
    """64-bin (4x4x4) normalized RGB histogram; all zeros for an empty crop."""
    if raster.empty:
        return np.zeros(HIST_BINS, dtype=np.float64)
    px = raster.pixels.reshape(-1, 3).astype(np.int64) >> 6
    idx = px[:, 0] * 16 + px[:, 1] * 4 + px[:, 2]
    counts = np.bincount(idx, minlength=HIST_BINS).astype(np.float64)
    return counts / counts.sum()


def signature_distance(s1: np.ndarray, s2: np.ndarray) -> float:
    e1, e2 = not s1.any(), not s2.any()
    if e1 and e2:
        return 0.0
    if e1 or e2:
        return 1.0
    return float(min(1.0, 0.5 * np.abs(s1 - s2).sum()))


def imagediff(v1: Raster, v2: Raster) -> float:
    """Halved L1 distance between histogram signatures, in [0, 1]."""
    return signature_distance(histogram_signature(v1), histogram_signature(v2))


def fragment_signature(f: Fragment) -> np.ndarray:
    if "signature" not in f._cache:
        f._cache["signature"] = histogram_signature(f.crop)
    return f._cache["signature"]


def page_signature(snap: StateSnapshot) -> np.ndarray:
    if "page_signature" not in snap._cache:
        snap._cache["page_signature"] = histogram_signature(snap.raster)
    return snap._cache["page_signature"]


# ============================================================================
# CLASSIFICATION
# ============================================================================

class _Classifier:
    def __init__(self, cfg: CompareConfig, cache: dict, trace: Optional[list] = None):
        self.cfg = cfg
        self.cache = cache
        self.trace = trace

    def classify(self, f1: Fragment, f2: Fragment, depth: int = 0) -> ClassLabel:
        if depth > self.cfg.max_depth:
            raise RecursionDepthExceeded(
                f"classification of {f1.label} vs {f2.label} exceeded depth {self.cfg.max_depth}")
        # canonical order keeps results symmetric
        a, b = (f1, f2) if f1.ident <= f2.ident else (f2, f1)
        key = (a.ident, b.ident)
        if key in self.cache:
            return self.cache[key]
        step = {"pair": [a.label, b.label], "depth": depth}
        if a.ident == b.ident:
            label = ClassLabel.CLONE
            step.update(ndiff=0, visual=0.0)
        else:
            ndiff = treediff(a, b)
            step["ndiff"] = len(ndiff)
            if not ndiff:
                d = signature_distance(fragment_signature(a), fragment_signature(b))
                step["visual"] = d
                label = ClassLabel.CLONE if d <= self.cfg.visual_epsilon else ClassLabel.ND2
            else:
                step["mapping"] = []
                label = self.map_child_fragments(ndiff, a, b, depth, step["mapping"])
        step["label"] = label.value
        if self.trace is not None:
            self.trace.append(step)
        self.cache[key] = label
        return label

    def map_child_fragments(self, ndiff: NodeDiff, f1: Fragment, f2: Fragment,
                            depth: int = 0, decisions: Optional[list] = None) -> ClassLabel:
        decisions = decisions if decisions is not None else []
        resolved: Dict[Tuple[int, int], Optional[Fragment]] = {}
        for side, nid in sorted(ndiff.changed):
            f_self, f_oth = (f1, f2) if side == 0 else (f2, f1)
            f_clo = closest(nid, f_self)
            if f_clo is f_self:
                decisions.append({"node": [side, nid], "closest": f_clo.label, "matched": None})
                return ClassLabel.DISTINCT
            rkey = (side, f_clo.frag_id)
            if rkey not in resolved:
                resolved[rkey] = None
                for cand in f_oth.useful_descendants():
                    if self.classify(f_clo, cand, depth + 1) != ClassLabel.DISTINCT:
                        resolved[rkey] = cand
                        break
                decisions.append({"node": [side, nid], "closest": f_clo.label,
                                  "matched": resolved[rkey].label if resolved[rkey] else None})
            if resolved[rkey] is None:
                return ClassLabel.DISTINCT
        return ClassLabel.ND3


def _classifier(memo=None, cfg: Optional[CompareConfig] = None, trace: Optional[list] = None) -> _Classifier:
    if memo is not None:
        return _Classifier(cfg or memo.compare_cfg, memo.results, trace)
    return _Classifier(cfg or CompareConfig(), {}, trace)


def classify(f1: Fragment, f2: Fragment, memo=None, cfg: Optional[CompareConfig] = None) -> ClassLabel:
    """
    Relation between two fragments. When a FragmentMemo is supplied its
    result cache is read and extended.
    """
    return _classifier(memo, cfg).classify(f1, f2)


def map_child_fragments(ndiff: NodeDiff, f1: Fragment, f2: Fragment, memo=None,
                        cfg: Optional[CompareConfig] = None) -> ClassLabel:
    """
    Nd3 when every changed node's closest fragment has a non-Distinct
    counterpart among the other side's useful descendants, else Distinct.
    """
    return _classifier(memo, cfg).map_child_fragments(ndiff, f1, f2)


def explain(f1: Fragment, f2: Fragment, cfg: Optional[CompareConfig] = None) -> dict:
    """Classification plus every comparison step taken, outermost last."""
    steps: List[dict] = []
    label = _Classifier(cfg or CompareConfig(), {}, steps).classify(f1, f2)
    return {"label": label.value, "steps": steps}


def is_near_clone(f1: Fragment, f2: Fragment, memo=None, cfg: Optional[CompareConfig] = None) -> bool:
    """classify(f1, f2) in {Clone, Nd2}, skipping the tree diff when shapes differ."""
    if fragment_shape(f1) != fragment_shape(f2):
        return False
    return classify(f1, f2, memo, cfg) in NEAR_CLONE


def _pixel_change_mask(expected: Raster, observed: Raster) -> np.ndarray:
    h = max(expected.height, observed.height)
    w = max(expected.width, observed.width)
    in_expected = np.zeros((h, w), dtype=bool)
    in_expected[:expected.height, :expected.width] = True
    in_observed = np.zeros((h, w), dtype=bool)
    in_observed[:observed.height, :observed.width] = True
    # area present on only one side counts as changed
    mask = in_expected ^ in_observed
    ch, cw = min(expected.height, observed.height), min(expected.width, observed.width)
    mask[:ch, :cw] = np.any(expected.pixels[:ch, :cw] != observed.pixels[:ch, :cw], axis=2)
    return mask


def localize_visual_changes(expected_root: Fragment, observed: Raster) -> List[Fragment]:
    """
    Deepest useful fragments of the expected page whose pixels differ from the
    observed raster in an area not covered by one of their useful children.
    """
    mask = _pixel_change_mask(expected_root.snapshot.raster, observed)
    probe = Raster(np.zeros(mask.shape + (3,), dtype=np.uint8))
    changed = []
    for f in expected_root.useful_fragments():
        x, y, w, h = probe.clamp(f.bbox)
        region = mask[y:y + h, x:x + w].copy()
        if not region.any():
            continue
        for c in f.useful_children:
            cx, cy, cw, chh = probe.clamp(c.bbox)
            region[max(cy - y, 0):max(cy - y + chh, 0), max(cx - x, 0):max(cx - x + cw, 0)] = False
        if region.any():
            changed.append(f)
    return changed


def changed_fragments(expected_root: Fragment, observed_root: Fragment) -> List[Tuple[str, Fragment]]:
    """Closest fragments of structurally changed nodes, tagged 'expected' or 'observed'."""
    ndiff = treediff(expected_root, observed_root)
    seen, out = set(), []
    for side, nid in sorted(ndiff.changed):
        root, tag = (expected_root, "expected") if side == 0 else (observed_root, "observed")
        f = closest(nid, root)
        if (tag, f.frag_id) not in seen:
            seen.add((tag, f.frag_id))
            out.append((tag, f))
    return out
