# harness.py
"""
Simulated web app served from JSON definitions, plus whole-page SAFs.

An app definition looks like:

    {"name": "addressbook-mini", "baseUrl": "http://addressbook.local/",
     "start": "home", "viewport": {"w": 1024, "h": 768}, "seed": 7,
     "generators": {"entries": {"kind": "person", "initial": 1},
                    "tip": {"kind": "choice", "initial": "...", "values": [...]}},
     "layout": <template tree with one {"slot": true} node>,
     "pages": {"home": {"path": "index.php", "content": [<template>, ...]}},
     "transitions": [{"from": "*", "xpath": "//a[text()='List']",
                      "effects": [{"op": "goto", "page": "list"}]}]}

Template nodes carry tag/attrs/text/bbox/fill/children. A bbox height may be
"fit" (children extent + 10px), "wrap" (children extent) or "page" (whole
page height). {"repeat": "<generator>", "pitch": 45, "node": {...}} emits the
node once per data row, shifted down by pitch; "{tip}" and "{row.name}"
placeholders are filled from generator values.

A definition may "extends" another file, "remove" template nodes by tag and
text, and override transitions keyed by (from, xpath).
"""

import copy
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

from pagefrag.comparison import page_shape, page_signature, page_tree, signature_distance
from pagefrag.config import DEFAULT_VIEWPORT
from pagefrag.errors import InvalidConfig, ParseError, StaleActionable
from pagefrag.rng import DeterministicRNG
from pagefrag.snapshot import Actionable, StateSnapshot, build_dom, resolve_locator
from pagefrag.treedist import tree_edit_distance

logger = logging.getLogger(__name__)

FIT_PAD = 10
PAGE_PAD = 20
EFFECT_OPS = ("goto", "addRow", "mutateData", "noop")
GENERATOR_KINDS = ("person", "choice")
SAF_KINDS = ("structural", "visual")
PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)(?:\.([a-z_]+))?\}")

FIRST_NAMES = ("Ada", "Grace", "Alan", "Edsger", "Barbara", "Donald", "Frances", "John", "Katherine", "Niklaus")
LAST_NAMES = ("Lovelace", "Hopper", "Turing", "Dijkstra", "Liskov", "Knuth", "Allen", "Backus", "Johnson", "Wirth")
GROUPS = ("family", "friends", "work", "club")


@dataclass(frozen=True)
class Effect:
    op: str
    page: Optional[str] = None
    generator: Optional[str] = None
    duplicate: bool = False


@dataclass(frozen=True)
class Transition:
    sources: Optional[Tuple[str, ...]]  # None matches every page
    xpath: str
    effects: Tuple[Effect, ...]

    def applies_to(self, page: str) -> bool:
        return self.sources is None or page in self.sources


@dataclass(frozen=True, eq=False)
class SimApp:
    name: str
    base_url: str
    start: str
    viewport: Tuple[int, int]
    seed: int
    generators: Mapping[str, dict]
    layout: Mapping
    pages: Mapping[str, dict]
    transitions: Tuple[Transition, ...]
    source: Optional[Path] = None

    def url_of(self, page: str) -> str:
        return self.base_url + self.pages[page].get("path", page)


# ============================================================================
# APP DEFINITIONS
# ============================================================================

def _read_json(path: Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"cannot read app definition {path}: {e}") from e


def _transition_key(raw: Mapping) -> Tuple[str, str]:
    src = raw.get("from", "*")
    src = ",".join(src) if isinstance(src, list) else str(src)
    return src, str(raw.get("xpath", ""))


def _matches_patch(node: Mapping, patch: Mapping) -> bool:
    if node.get("tag") != patch.get("tag"):
        return False
    if "text" in patch and node.get("text") != patch["text"]:
        return False
    attrs = node.get("attrs") or {}
    return all(attrs.get(k) == v for k, v in (patch.get("attrs") or {}).items())


def _remove_nodes(nodes: List, patches: List[Mapping]) -> List:
    kept = []
    for node in nodes:
        if "repeat" in node:
            inner = _remove_nodes([node["node"]], patches)
            if not inner:
                continue
            node = dict(node, node=inner[0])
        elif "tag" in node:
            if any(_matches_patch(node, p) for p in patches):
                continue
            node = dict(node, children=_remove_nodes(node.get("children") or [], patches))
        kept.append(node)
    return kept


def _resolve_raw(path: Path, seen: Tuple[Path, ...] = ()) -> dict:
    path = Path(path).resolve()
    if path in seen:
        raise ParseError(f"app definition {path} extends itself")
    data = _read_json(path)
    if "extends" not in data:
        return data
    base = _resolve_raw(path.parent / data["extends"], seen + (path,))
    merged = copy.deepcopy(base)
    for key in ("name", "baseUrl", "start", "viewport", "seed", "layout"):
        if key in data:
            merged[key] = data[key]
    merged["generators"] = {**base.get("generators", {}), **data.get("generators", {})}
    merged["pages"] = {**base.get("pages", {}), **data.get("pages", {})}
    transitions = list(base.get("transitions", []))
    index = {_transition_key(t): i for i, t in enumerate(transitions)}
    for t in data.get("transitions", []):
        key = _transition_key(t)
        if key in index:
            transitions[index[key]] = t
        else:
            index[key] = len(transitions)
            transitions.append(t)
    merged["transitions"] = transitions
    patches = data.get("remove") or []
    if patches:
        merged["layout"] = _remove_nodes([merged["layout"]], patches)[0]
        for page in merged["pages"].values():
            page["content"] = _remove_nodes(page.get("content") or [], patches)
    return merged


def _parse_effect(raw: Mapping) -> Effect:
    op = raw.get("op")
    if op not in EFFECT_OPS:
        raise ParseError(f"unknown effect op {op!r}")
    return Effect(op=op, page=raw.get("page"), generator=raw.get("generator"), duplicate=bool(raw.get("duplicate", False)))


def app_from_dict(data: Mapping, source: Optional[Path] = None) -> SimApp:
    """
    Build a SimApp from an already merged definition.

    Raises:
        ParseError: a required key is missing or malformed
        InvalidConfig: a reference (page, generator) does not exist
    """
    for key in ("name", "baseUrl", "start", "layout", "pages"):
        if key not in data:
            raise ParseError(f"app definition missing {key!r}")
    pages = dict(data["pages"])
    if data["start"] not in pages:
        raise InvalidConfig(f"start page {data['start']!r} is not defined")
    generators = dict(data.get("generators") or {})
    for name, gen in generators.items():
        if gen.get("kind") not in GENERATOR_KINDS:
            raise InvalidConfig(f"generator {name!r} has unknown kind {gen.get('kind')!r}")
        if gen["kind"] == "choice" and not gen.get("values"):
            raise InvalidConfig(f"choice generator {name!r} has no values")
    transitions = []
    for raw in data.get("transitions", []):
        src = raw.get("from", "*")
        sources = None if src == "*" else tuple(src if isinstance(src, list) else [src])
        for s in sources or ():
            if s not in pages:
                raise InvalidConfig(f"transition source {s!r} is not a page")
        effects = tuple(_parse_effect(e) for e in raw.get("effects", []))
        for e in effects:
            if e.op == "goto" and e.page not in pages:
                raise InvalidConfig(f"goto target {e.page!r} is not a page")
            if e.op in ("addRow", "mutateData") and e.generator not in generators:
                raise InvalidConfig(f"effect refers to unknown generator {e.generator!r}")
            if e.op == "addRow" and generators[e.generator]["kind"] != "person":
                raise InvalidConfig(f"addRow needs a person generator, got {e.generator!r}")
        if not raw.get("xpath"):
            raise ParseError(f"transition from {src!r} has no xpath")
        transitions.append(Transition(sources=sources, xpath=raw["xpath"], effects=effects))
    vp = data.get("viewport") or {}
    viewport = (int(vp.get("w", DEFAULT_VIEWPORT[0])), int(vp.get("h", DEFAULT_VIEWPORT[1])))
    if viewport[0] <= 0 or viewport[1] <= 0:
        raise InvalidConfig(f"viewport must be positive, got {viewport}")
    return SimApp(
        name=str(data["name"]),
        base_url=str(data["baseUrl"]),
        start=str(data["start"]),
        viewport=viewport,
        seed=int(data.get("seed", 0)),
        generators=generators,
        layout=data["layout"],
        pages=pages,
        transitions=tuple(transitions),
        source=source,
    )


def validate_app(app: SimApp) -> None:
    """Every page-specific transition xpath must select a node in its source page at initial data."""
    sess = Session(app)
    for t in app.transitions:
        for page in t.sources or ():
            snap = sess.render(page)
            if not snap.dom.xpath_nodes(t.xpath):
                raise InvalidConfig(f"transition xpath {t.xpath!r} selects nothing in page {page!r}")


def load_app(path: Path) -> SimApp:
    path = Path(path)
    app = app_from_dict(_resolve_raw(path), source=path)
    validate_app(app)
    logger.debug(f"[loaded] app {app.name}: {len(app.pages)} pages, {len(app.transitions)} transitions")
    return app


# ============================================================================
# RENDERING
# ============================================================================

def _fill(text: Optional[str], values: Mapping, row: Optional[Mapping]) -> Optional[str]:
    if text is None:
        return None

    def sub(m):
        name, field_name = m.group(1), m.group(2)
        if name == "row":
            if row is None or field_name not in row:
                raise InvalidConfig(f"placeholder {m.group(0)} used outside a matching repeat")
            return str(row[field_name])
        if name not in values or field_name is not None:
            raise InvalidConfig(f"unknown placeholder {m.group(0)}")
        return str(values[name])

    return PLACEHOLDER_RE.sub(sub, str(text))


def _instantiate(tpl: Mapping, content: List, values: Mapping, row, dy: int) -> List[dict]:
    if tpl.get("slot"):
        out = []
        for c in content:
            out.extend(_instantiate(c, [], values, row, dy))
        return out
    if "repeat" in tpl:
        rows = values.get(tpl["repeat"])
        if not isinstance(rows, (list, tuple)):
            raise InvalidConfig(f"repeat source {tpl['repeat']!r} is not a row generator")
        pitch = int(tpl.get("pitch", 0))
        out = []
        for i, r in enumerate(rows):
            out.extend(_instantiate(tpl["node"], content, values, r, dy + i * pitch))
        return out
    children = []
    for c in tpl.get("children") or []:
        children.extend(_instantiate(c, content, values, row, dy))
    bbox = tpl.get("bbox")
    if bbox is not None:
        x, y, w, h = bbox
        y = y + dy
        if h in ("fit", "wrap"):
            bottoms = [c["bbox"][1] + c["bbox"][3] for c in children
                       if c["bbox"] is not None and isinstance(c["bbox"][3], int)]
            h = (max(bottoms) if bottoms else y) - y + (FIT_PAD if h == "fit" else 0)
        bbox = [x, y, w, h]
    return [{
        "tag": tpl["tag"],
        "attrs": {k: _fill(v, values, row) for k, v in (tpl.get("attrs") or {}).items()},
        "text": _fill(tpl.get("text"), values, row),
        "bbox": bbox,
        "fill": tpl.get("fill"),
        "children": children,
    }]


def _flatten(root: dict, page_h: int) -> List[dict]:
    records: List[dict] = []
    stack = [root]
    while stack:
        node = stack.pop()
        nid = len(records)
        bbox = node["bbox"]
        if bbox is not None and bbox[3] == "page":
            bbox = [bbox[0], bbox[1], bbox[2], page_h]
        rec = {"id": nid, "tag": node["tag"], "attrs": node["attrs"], "text": node["text"],
               "bbox": bbox, "fill": node["fill"], "children": []}
        node["_rec"] = rec
        if "_parent" in node:
            node["_parent"]["_rec"]["children"].append(nid)
        records.append(rec)
        for c in reversed(node["children"]):
            c["_parent"] = node
            stack.append(c)
    return records


def _page_bottom(node: dict) -> int:
    bottom, stack = 0, [node]
    while stack:
        n = stack.pop()
        if n["bbox"] is not None and isinstance(n["bbox"][3], int):
            bottom = max(bottom, n["bbox"][1] + n["bbox"][3])
        stack.extend(n["children"])
    return bottom


def _freeze(value):
    if isinstance(value, list):
        return tuple(tuple(sorted(r.items())) for r in value)
    return value


def _thaw(value):
    if isinstance(value, tuple):
        return [dict(r) for r in value]
    return value


@lru_cache(maxsize=8)
def _render(app: SimApp, page: str, data_key: Tuple) -> StateSnapshot:
    values = {name: _thaw(v) for name, v in data_key}
    built = _instantiate(app.layout, app.pages[page].get("content") or [], values, None, 0)
    if len(built) != 1:
        raise InvalidConfig(f"layout of {app.name} must produce exactly one root node")
    page_h = max(app.viewport[1], _page_bottom(built[0]) + PAGE_PAD)
    dom = build_dom(_flatten(built[0], page_h))
    return StateSnapshot(state_id=page, url=app.url_of(page), dom=dom, viewport=(app.viewport[0], page_h))


# ============================================================================
# SESSION
# ============================================================================

class Session:
    """
    One simulated browser on one app. Data generators are re-seeded on
    reset(); load_url() keeps app data, as a page reload would. A choice
    generator's next value is seeded from its shown value.
    """

    def __init__(self, app: SimApp, seed: Optional[int] = None):
        self.app = app
        self.seed = app.seed if seed is None else seed
        self.reset()

    def reset(self) -> None:
        rng = DeterministicRNG(self.seed, self.app.name)
        self._streams = {name: rng.child(f"gen/{name}") for name in self.app.generators}
        self.data: Dict[str, object] = {}
        for name, gen in self.app.generators.items():
            if gen["kind"] == "person":
                self.data[name] = [self._person(name) for _ in range(int(gen.get("initial", 0)))]
            else:
                self.data[name] = gen["initial"] if "initial" in gen else self._streams[name].choice(gen["values"])
        self.page: Optional[str] = None
        self.current: Optional[StateSnapshot] = None
        self.history: List[Tuple[str, str]] = []

    def _person(self, name: str) -> dict:
        rng = self._streams[name]
        first, last = rng.choice(FIRST_NAMES), rng.choice(LAST_NAMES)
        return {
            "name": f"{first} {last}",
            "email": f"{first}.{last}@example.org".lower(),
            "phone": f"555-{rng.randint(0, 9999):04d}",
            "group": rng.choice(GROUPS),
        }

    def render(self, page: str) -> StateSnapshot:
        key = tuple((name, _freeze(self.data[name])) for name in sorted(self.data))
        return _render(self.app, page, key)

    def load_url(self) -> StateSnapshot:
        self.page = self.app.start
        self.current = self.render(self.page)
        self.history.append(("load", self.app.url_of(self.page)))
        return self.current

    def _apply(self, effect: Effect) -> None:
        if effect.op == "goto":
            self.page = effect.page
        elif effect.op == "addRow":
            rows = self.data[effect.generator]
            if effect.duplicate and rows:
                rows.append(dict(rows[-1]))
            else:
                rows.append(self._person(effect.generator))
        elif effect.op == "mutateData":
            gen = self.app.generators[effect.generator]
            if gen["kind"] == "person":
                self.data[effect.generator] = [self._person(effect.generator) for _ in self.data[effect.generator]]
            else:
                # next value depends only on the shown value
                current = self.data[effect.generator]
                options = [v for v in gen["values"] if v != current]
                if options:
                    rng = DeterministicRNG(self.seed, self.app.name).child(f"gen/{effect.generator}/{current}")
                    self.data[effect.generator] = rng.choice(options)

    def fire(self, target: Union[Actionable, str]) -> StateSnapshot:
        """
        Fire an actionable (or a raw absolute locator) on the current page.

        Raises:
            StaleActionable: the locator does not resolve to exactly one node
        """
        locator = target.locator if isinstance(target, Actionable) else str(target)
        if self.current is None:
            raise StaleActionable(f"cannot fire {locator!r}: no page loaded")
        nid = resolve_locator(self.current, locator)
        for t in self.app.transitions:
            if t.applies_to(self.page) and nid in self.current.dom.xpath_nodes(t.xpath):
                for effect in t.effects:
                    self._apply(effect)
                break
        else:
            logger.debug(f"[noop] no transition for {locator!r} on page {self.page}")
        self.history.append(("fire", locator))
        self.current = self.render(self.page)
        return self.current


# ============================================================================
# WHOLE-PAGE SAFs
# ============================================================================

class Gamma(Enum):
    CLONE = "Clone"
    ND = "Nd"
    DISTINCT = "Distinct"


@dataclass(frozen=True)
class WholePageSAF:
    kind: str
    t_c: float
    t_n: float

    def __post_init__(self):
        if self.kind not in SAF_KINDS:
            raise InvalidConfig(f"SAF kind must be one of {SAF_KINDS}, got {self.kind!r}")
        if not 0 <= self.t_c <= self.t_n:
            raise InvalidConfig(f"thresholds must satisfy 0 <= t_c <= t_n, got {self.t_c}, {self.t_n}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "t_c": self.t_c, "t_n": self.t_n}


def structural_distance(s1: StateSnapshot, s2: StateSnapshot, bound: Optional[float] = None) -> float:
    """
    Tree edit distance between pruned whole-page trees over the larger node
    count. When `bound` is given and a cheap lower bound already exceeds it,
    that lower bound is returned instead of the exact distance.
    """
    n = max(len(s1.dom), len(s2.dom))
    if page_shape(s1) == page_shape(s2):
        return 0.0
    lower = max(1, abs(len(s1.dom) - len(s2.dom))) / n
    if bound is not None and lower <= bound:
        c1, c2 = _tag_counts(s1), _tag_counts(s2)
        lower = max(lower, sum((c1 - c2).values()) / n, sum((c2 - c1).values()) / n)
    if bound is not None and lower > bound:
        return lower
    return tree_edit_distance(page_tree(s1), page_tree(s2)).distance / n


def _tag_counts(snap: StateSnapshot) -> Counter:
    if "tag_counts" not in snap._cache:
        snap._cache["tag_counts"] = Counter(node.tag for node in snap.dom.nodes.values())
    return snap._cache["tag_counts"]


def visual_distance(s1: StateSnapshot, s2: StateSnapshot) -> float:
    return signature_distance(page_signature(s1), page_signature(s2))


def page_distance(kind: str, s1: StateSnapshot, s2: StateSnapshot, bound: Optional[float] = None) -> float:
    if kind == "structural":
        return structural_distance(s1, s2, bound)
    if kind == "visual":
        return visual_distance(s1, s2)
    raise InvalidConfig(f"unknown distance kind {kind!r}")


def gamma_of(saf: WholePageSAF, distance: float) -> Gamma:
    if distance < saf.t_c:
        return Gamma.CLONE
    if distance > saf.t_n:
        return Gamma.DISTINCT
    return Gamma.ND


def gamma_classify(saf: WholePageSAF, s1: StateSnapshot, s2: StateSnapshot) -> Gamma:
    return gamma_of(saf, page_distance(saf.kind, s1, s2, bound=saf.t_n))
