# snapshot.py
"""
Page snapshot data model and its JSON file format.

A snapshot file holds one captured page:

    {"stateId": "s1", "url": "...", "viewport": {"w": 1024, "h": 768},
     "root": 0,
     "nodes": [{"id": 0, "tag": "html", "attrs": {}, "text": null,
                "bbox": [x, y, w, h], "fill": [r, g, b], "children": [1]}],
     "screenshot": "s1.png"}

Node ids in the file may be arbitrary; the loader renumbers them in document
(pre-)order so ids are stable across runs.
"""

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from lxml import etree

from pagefrag.config import DEFAULT_TAGS, DEFAULT_VIEWPORT, FragConfig
from pagefrag.errors import InvalidConfig, InvariantError, ParseError, StaleActionable
from pagefrag.raster import BBox, Raster, rasterize

logger = logging.getLogger(__name__)

NODE_ID_ATTR = "data-pf-node"
TAG_RE = re.compile(r"^[a-z][a-z0-9-]*$")
SELECTOR_RE = re.compile(r"^([a-z][a-z0-9-]*)(?:\[([a-z][a-z0-9_-]*)=['\"]?([^'\"\]]*)['\"]?\])?$")
HIDDEN_STYLE_RE = re.compile(r"(display\s*:\s*none|visibility\s*:\s*hidden)", re.I)


@dataclass(frozen=True)
class DomNode:
    id: int
    tag: str
    attributes: Dict[str, str]
    text: Optional[str]
    children: Tuple[int, ...]
    bbox: Optional[BBox]
    fill: Optional[Tuple[int, int, int]]
    visible: bool


def _hidden_by_markup(attrs: Mapping[str, str]) -> bool:
    if "hidden" in attrs:
        return True
    return bool(HIDDEN_STYLE_RE.search(attrs.get("style", "")))


@dataclass(frozen=True, eq=False)
class DomTree:
    """Validated, renumbered DOM tree. Ids run 0..n-1 in document order."""
    nodes: Dict[int, DomNode]
    root: int

    def __len__(self) -> int:
        return len(self.nodes)

    @cached_property
    def order(self) -> Tuple[int, ...]:
        return tuple(sorted(self.nodes))

    @cached_property
    def parent(self) -> Dict[int, Optional[int]]:
        parents: Dict[int, Optional[int]] = {self.root: None}
        for node in self.nodes.values():
            for c in node.children:
                parents[c] = node.id
        return parents

    @cached_property
    def depth(self) -> Dict[int, int]:
        depths = {self.root: 0}
        for nid in self.order:
            for c in self.nodes[nid].children:
                depths[c] = depths[nid] + 1
        return depths

    @cached_property
    def xpaths(self) -> Dict[int, str]:
        paths = {self.root: f"/{self.nodes[self.root].tag}[1]"}
        for nid in self.order:
            seen: Dict[str, int] = {}
            for c in self.nodes[nid].children:
                tag = self.nodes[c].tag
                seen[tag] = seen.get(tag, 0) + 1
                paths[c] = f"{paths[nid]}/{tag}[{seen[tag]}]"
        return paths

    @cached_property
    def lxml_tree(self) -> etree._ElementTree:
        """lxml view of the tree; every element carries its node id."""
        elements = {}
        for nid in self.order:
            node = self.nodes[nid]
            parent = self.parent[nid]
            el = etree.Element(node.tag) if parent is None else etree.SubElement(elements[parent], node.tag)
            for name, value in node.attributes.items():
                try:
                    el.set(name, value)
                except ValueError:
                    logger.debug(f"[skipped] attribute {name!r} on node {nid} is not a valid XML name")
            el.set(NODE_ID_ATTR, str(nid))
            if node.text is not None:
                el.text = node.text
            elements[nid] = el
        return etree.ElementTree(elements[self.root])

    @cached_property
    def _elements(self) -> Dict[int, etree._Element]:
        return {int(el.get(NODE_ID_ATTR)): el for el in self.lxml_tree.iter()}

    def ancestors(self, nid: int) -> List[int]:
        """Ancestors of nid from its parent up to the root."""
        chain = []
        p = self.parent[nid]
        while p is not None:
            chain.append(p)
            p = self.parent[p]
        return chain

    def is_ancestor(self, a: int, b: int) -> bool:
        return a in self.ancestors(b)

    def lowest_common_ancestor(self, ids: Iterable[int]) -> int:
        ids = list(ids)
        if not ids:
            return self.root
        common = [ids[0]] + self.ancestors(ids[0])
        for nid in ids[1:]:
            line = set([nid] + self.ancestors(nid))
            common = [a for a in common if a in line]
        return common[0]

    def xpath_nodes(self, expr: str, context: Optional[int] = None) -> List[int]:
        """Evaluate an XPath expression and return the node ids it selects."""
        target = self.lxml_tree if context is None else self._elements[context]
        try:
            found = target.xpath(expr)
        except etree.XPathError as e:
            raise StaleActionable(f"invalid locator {expr!r}: {e}") from e
        if not isinstance(found, list):
            return []
        return [int(el.get(NODE_ID_ATTR)) for el in found if isinstance(el, etree._Element) and el.get(NODE_ID_ATTR) is not None]

    def relative_xpath(self, anchor: int, nid: int) -> str:
        """Positional XPath of nid written relative to anchor, e.g. './tr[2]/td[1]'."""
        if nid == anchor:
            return "."
        full, base = self.xpaths[nid], self.xpaths[anchor]
        if not full.startswith(base + "/"):
            raise InvariantError(f"node {nid} is not inside node {anchor}")
        return "." + full[len(base):]

    def to_records(self) -> List[dict]:
        records = []
        for nid in self.order:
            n = self.nodes[nid]
            rec = {"id": n.id, "tag": n.tag, "attrs": dict(n.attributes), "text": n.text,
                   "bbox": list(n.bbox) if n.bbox is not None else None,
                   "fill": list(n.fill) if n.fill is not None else None,
                   "children": list(n.children)}
            records.append(rec)
        return records


def _as_bbox(raw, nid) -> Optional[BBox]:
    if raw is None:
        return None
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise ParseError(f"node {nid}: bbox must be [x, y, w, h], got {raw!r}")
    try:
        x, y, w, h = (int(round(float(v))) for v in raw)
    except (TypeError, ValueError) as e:
        raise ParseError(f"node {nid}: bbox values must be numbers ({e})") from e
    if w < 0 or h < 0:
        raise InvariantError(f"node {nid}: bbox has negative size {raw!r}")
    return (x, y, w, h)


def _as_fill(raw, nid) -> Optional[Tuple[int, int, int]]:
    if raw is None:
        return None
    if not isinstance(raw, (list, tuple)) or len(raw) != 3:
        raise ParseError(f"node {nid}: fill must be [r, g, b], got {raw!r}")
    rgb = tuple(int(v) for v in raw)
    if any(v < 0 or v > 255 for v in rgb):
        raise ParseError(f"node {nid}: fill channel out of range {raw!r}")
    return rgb


def build_dom(records: Sequence[Mapping], root: Optional[int] = None) -> DomTree:
    """
    Validate raw node records and build a renumbered DomTree.

    Raises:
        ParseError: a record is malformed
        InvariantError: the records do not form a single tree
    """
    raw: Dict = {}
    for rec in records:
        if "id" not in rec or "tag" not in rec:
            raise ParseError(f"node record missing id or tag: {rec!r}")
        nid = rec["id"]
        if nid in raw:
            raise InvariantError(f"duplicate node id {nid!r}")
        tag = str(rec["tag"]).lower()
        if not TAG_RE.match(tag):
            raise ParseError(f"node {nid}: invalid tag {rec['tag']!r}")
        raw[nid] = rec
    if not raw:
        raise InvariantError("snapshot has no nodes")

    parent_of: Dict = {}
    for nid, rec in raw.items():
        for c in rec.get("children") or []:
            if c not in raw:
                raise InvariantError(f"node {nid} lists missing child {c!r}")
            if c in parent_of:
                raise InvariantError(f"node {c!r} has more than one parent")
            parent_of[c] = nid

    roots = [nid for nid in raw if nid not in parent_of]
    if len(roots) != 1:
        raise InvariantError(f"expected exactly one root, found {len(roots)}")
    if root is not None and root != roots[0]:
        raise InvariantError(f"declared root {root!r} is not the parentless node {roots[0]!r}")

    # pre-order walk assigns new ids; unreachable nodes mean a cycle
    renumber: Dict = {}
    stack = [roots[0]]
    while stack:
        nid = stack.pop()
        renumber[nid] = len(renumber)
        stack.extend(reversed(raw[nid].get("children") or []))
    if len(renumber) != len(raw):
        raise InvariantError("node graph contains a cycle")

    nodes: Dict[int, DomNode] = {}
    hidden: Dict[int, bool] = {}
    for old in sorted(renumber, key=renumber.get):
        rec = raw[old]
        new = renumber[old]
        bbox = _as_bbox(rec.get("bbox"), old)
        attrs = {str(k): str(v) for k, v in (rec.get("attrs") or {}).items()}
        text = rec.get("text")
        parent = parent_of.get(old)
        hidden[new] = _hidden_by_markup(attrs) or (parent is not None and hidden[renumber[parent]])
        nodes[new] = DomNode(
            id=new,
            tag=str(rec["tag"]).lower(),
            attributes=attrs,
            text=None if text is None else str(text),
            children=tuple(renumber[c] for c in rec.get("children") or []),
            bbox=bbox,
            fill=_as_fill(rec.get("fill"), old),
            visible=not hidden[new] and bbox is not None and bbox[2] > 0 and bbox[3] > 0,
        )
    return DomTree(nodes=nodes, root=0)


@dataclass(frozen=True, eq=False)
class StateSnapshot:
    """A captured page: DOM, viewport and (lazily) its raster and fragments."""
    state_id: str
    url: str
    dom: DomTree
    viewport: Tuple[int, int] = DEFAULT_VIEWPORT
    screenshot: Optional[Path] = None
    _cache: dict = field(default_factory=dict, repr=False)

    @cached_property
    def raster(self) -> Raster:
        if self.screenshot is not None:
            return Raster.from_png(self.screenshot)
        return rasterize(self.dom, *self.viewport)

    def release_raster(self) -> None:
        """Drop the cached raster; it is repainted on next access."""
        self.__dict__.pop("raster", None)

    @cached_property
    def uid(self) -> str:
        """Content digest of DOM + viewport (+ screenshot); independent of stateId."""
        h = hashlib.sha256()
        h.update(json.dumps({"viewport": list(self.viewport), "nodes": self.dom.to_records()},
                            sort_keys=True, separators=(",", ":")).encode("utf-8"))
        if self.screenshot is not None:
            with open(self.screenshot, "rb") as f:
                for chunk in iter(lambda: f.read(65536), b""):
                    h.update(chunk)
        return h.hexdigest()

    def root_fragment(self, cfg: Optional[FragConfig] = None):
        """Root of the fragment hierarchy, computed once per config."""
        from pagefrag.fragmentation import fragment

        cfg = cfg or FragConfig()
        key = ("fragments", cfg)
        if key not in self._cache:
            self._cache[key] = fragment(self, cfg)
        return self._cache[key]

    def renamed(self, state_id: str) -> "StateSnapshot":
        """Same page under a new state id. Fragment caches are not shared; page-level ones are."""
        clone = StateSnapshot(state_id=state_id, url=self.url, dom=self.dom,
                              viewport=self.viewport, screenshot=self.screenshot,
                              _cache={k: v for k, v in self._cache.items() if isinstance(k, str)})
        if "raster" in self.__dict__:
            clone.__dict__["raster"] = self.__dict__["raster"]
        if "uid" in self.__dict__:
            clone.__dict__["uid"] = self.__dict__["uid"]
        return clone

    def to_dict(self) -> dict:
        data = {
            "stateId": self.state_id,
            "url": self.url,
            "viewport": {"w": self.viewport[0], "h": self.viewport[1]},
            "root": self.dom.root,
            "nodes": self.dom.to_records(),
        }
        if self.screenshot is not None:
            data["screenshot"] = self.screenshot.name
        return data


@dataclass(frozen=True)
class Actionable:
    node_id: int
    kind: str
    locator: str
    tag: str
    label: str = ""


def snapshot_from_dict(data: Mapping, base_dir: Optional[Path] = None) -> StateSnapshot:
    if not isinstance(data, Mapping):
        raise ParseError("snapshot must be a JSON object")
    if "nodes" not in data:
        raise ParseError("snapshot has no 'nodes' list")
    viewport = data.get("viewport") or {}
    try:
        vp = (int(viewport.get("w", DEFAULT_VIEWPORT[0])), int(viewport.get("h", DEFAULT_VIEWPORT[1])))
    except (TypeError, ValueError, AttributeError) as e:
        raise ParseError(f"bad viewport {viewport!r}") from e
    if vp[0] <= 0 or vp[1] <= 0:
        raise InvariantError(f"viewport must be positive, got {vp}")
    screenshot = None
    if data.get("screenshot"):
        screenshot = (Path(base_dir) if base_dir else Path(".")) / data["screenshot"]
        if not screenshot.exists():
            raise ParseError(f"screenshot {screenshot} does not exist")
    dom = build_dom(data["nodes"], data.get("root"))
    return StateSnapshot(
        state_id=str(data.get("stateId", "")),
        url=str(data.get("url", "")),
        dom=dom,
        viewport=vp,
        screenshot=screenshot,
    )


def load_snapshot(path: Path) -> StateSnapshot:
    """
    Load and validate one snapshot file.

    Raises:
        ParseError: the file is not valid snapshot JSON
        InvariantError: the node records do not form a valid tree
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"cannot read snapshot {path}: {e}") from e
    snap = snapshot_from_dict(data, base_dir=path.parent)
    logger.debug(f"[loaded] {path} state={snap.state_id} nodes={len(snap.dom)}")
    return snap


def save_snapshot(snap: StateSnapshot, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(snap.to_dict(), indent=1), encoding="utf-8")
    return path


def parse_tag_selector(selector: str) -> Tuple[str, Optional[Tuple[str, str]]]:
    """Split 'input[type=submit]' into ('input', ('type', 'submit'))."""
    m = SELECTOR_RE.match(selector.strip().lower())
    if not m:
        raise InvalidConfig(f"unsupported actionable selector {selector!r}")
    tag, attr, value = m.groups()
    return tag, ((attr, value) if attr else None)


def extract_actionables(snap: StateSnapshot, tag_set: Iterable[str] = DEFAULT_TAGS) -> List[Actionable]:
    """Visible nodes matching any selector in tag_set, in document order."""
    selectors = [parse_tag_selector(s) for s in tag_set]
    if not selectors:
        raise InvalidConfig("actionable tag set is empty")
    dom = snap.dom
    found = []
    for nid in dom.order:
        node = dom.nodes[nid]
        if not node.visible:
            continue
        for tag, cond in selectors:
            if node.tag != tag:
                continue
            if cond is not None and node.attributes.get(cond[0], "").lower() != cond[1]:
                continue
            submit = node.attributes.get("type", "").lower() == "submit" and node.tag in ("input", "button")
            found.append(Actionable(
                node_id=nid,
                kind="submit" if submit else "click",
                locator=dom.xpaths[nid],
                tag=node.tag,
                label=node.text or node.attributes.get("value", ""),
            ))
            break
    return found


def resolve_locator(snap: StateSnapshot, locator: str) -> int:
    """Node id selected by an absolute locator; StaleActionable unless exactly one."""
    hits = snap.dom.xpath_nodes(locator)
    if len(hits) != 1:
        raise StaleActionable(f"locator {locator!r} matched {len(hits)} node(s) in {snap.state_id or snap.url}")
    return hits[0]
