# crawler.py
"""
Model inference over a SimApp.

The crawler keeps firing the best-scoring actionable of the current state.
An actionable scores -1 once explored, 0 when an equivalent actionable (same
relative locator inside a Clone/Nd2 fragment) was explored, and c0 times the
size of its equivalence class otherwise. A state's score is the sum over its
actionables. When the current state has nothing left to explore the crawler
resets the app and replays the shortest recorded route to the best-scoring
state. Whole-page baselines merge a page into a model state only when the
pages are identical or the baseline SAF calls them Clone.
"""

import json
import logging
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

from pagefrag.comparison import NEAR_CLONE, ClassLabel, classify, fragment_shape, is_near_clone, page_signature
from pagefrag.config import DEFAULT_TAGS, CompareConfig, FragConfig
from pagefrag.errors import BacktrackFailed, InvalidConfig, ParseError, StaleActionable
from pagefrag.fragmentation import closest, relative_locator
from pagefrag.harness import Gamma, Session, SimApp, WholePageSAF, gamma_of, page_distance
from pagefrag.memo import FragmentMemo, observe_state, register_state
from pagefrag.snapshot import Actionable, StateSnapshot, extract_actionables, load_snapshot, save_snapshot

logger = logging.getLogger(__name__)

ActionKey = Tuple[str, str]  # (stateId, absolute locator)


@dataclass(frozen=True)
class CrawlConfig:
    c0: float = 1.0
    max_actions: Optional[int] = None
    max_states: Optional[int] = None
    max_duration: Optional[float] = None
    explore_skipped_duplicates: bool = False
    tag_set: Tuple[str, ...] = DEFAULT_TAGS
    frag: FragConfig = field(default_factory=FragConfig)
    compare: CompareConfig = field(default_factory=CompareConfig)
    baseline: Optional[WholePageSAF] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.c0 <= 1:
            raise InvalidConfig(f"c0 must lie in (0, 1], got {self.c0}")
        for name in ("max_actions", "max_states", "max_duration"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise InvalidConfig(f"{name} must be positive, got {value}")
        if not self.tag_set:
            raise InvalidConfig("actionable tag set is empty")

    def to_dict(self) -> dict:
        return {
            "c0": self.c0,
            "max_actions": self.max_actions,
            "max_states": self.max_states,
            "max_duration": self.max_duration,
            "explore_skipped_duplicates": self.explore_skipped_duplicates,
            "tag_set": list(self.tag_set),
            "frag": self.frag.to_dict(),
            "compare": self.compare.to_dict(),
            "baseline": self.baseline.to_dict() if self.baseline else None,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CrawlConfig":
        data = dict(data)
        data["tag_set"] = tuple(data.get("tag_set") or DEFAULT_TAGS)
        data["frag"] = FragConfig(**(data.get("frag") or {}))
        data["compare"] = CompareConfig(**(data.get("compare") or {}))
        data["baseline"] = WholePageSAF(**data["baseline"]) if data.get("baseline") else None
        return cls(**data)


@dataclass(frozen=True)
class ModelTransition:
    tid: str
    source: str
    locator: str
    target: str
    label: str = ""
    relation: str = "new"

    def to_dict(self) -> dict:
        return {"id": self.tid, "source": self.source, "locator": self.locator,
                "target": self.target, "label": self.label, "relation": self.relation}


@dataclass
class ExplorationPath:
    start: str
    transitions: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"start": self.start, "transitions": list(self.transitions)}


class AppModel:
    """States, transitions and exploration bookkeeping of one crawl."""

    def __init__(self, app_name: str, base_url: str, cfg: Optional[CrawlConfig] = None):
        self.app_name = app_name
        self.base_url = base_url
        self.cfg = cfg or CrawlConfig()
        self.states: Dict[str, StateSnapshot] = {}
        self.actionables: Dict[str, List[Actionable]] = {}
        self.transitions: List[ModelTransition] = []
        self.paths: List[ExplorationPath] = []
        self.memo: Optional[FragmentMemo] = None if self.cfg.baseline else FragmentMemo(self.cfg.compare, self.cfg.frag)
        self.audit: List[dict] = []
        self.explored: Set[ActionKey] = set()
        self.unreachable: Set[str] = set()
        self.stopped_by: Optional[str] = None
        self._equiv: Dict[Tuple[ActionKey, ActionKey], bool] = {}

    def __len__(self) -> int:
        return len(self.states)

    def add_state(self, snap: StateSnapshot) -> str:
        sid = f"s{len(self.states) + 1}"
        state = snap.renamed(sid)
        self.states[sid] = state
        self.actionables[sid] = extract_actionables(state, self.cfg.tag_set)
        return sid

    def add_transition(self, source: str, a: Actionable, target: str, relation: str) -> ModelTransition:
        t = ModelTransition(tid=f"t{len(self.transitions) + 1}", source=source, locator=a.locator,
                            target=target, label=a.label, relation=relation)
        self.transitions.append(t)
        return t

    def transition(self, tid: str) -> ModelTransition:
        for t in self.transitions:
            if t.tid == tid:
                return t
        raise KeyError(tid)

    def shortest_route(self, source: str, target: str) -> Optional[List[str]]:
        """Transition ids of a shortest recorded route (BFS, first-recorded edges first)."""
        if source == target:
            return []
        prev: Dict[str, Tuple[str, str]] = {}
        seen, queue = {source}, deque([source])
        while queue:
            sid = queue.popleft()
            for t in self.transitions:
                if t.source != sid or t.target in seen:
                    continue
                seen.add(t.target)
                prev[t.target] = (sid, t.tid)
                if t.target == target:
                    route = []
                    node = target
                    while node != source:
                        node, tid = prev[node]
                        route.append(tid)
                    return route[::-1]
                queue.append(t.target)
        return None

    def equivalence_class(self, state_id: str, a: Actionable) -> List[ActionKey]:
        """Every model actionable equivalent to a (a included), in discovery order."""
        me = (state_id, a.locator)
        if self.cfg.baseline is not None:
            return [me]
        members = []
        sx = self.states[state_id]
        for sid, acts in self.actionables.items():
            for b in acts:
                other = (sid, b.locator)
                if other == me:
                    members.append(me)
                    continue
                key = (me, other) if me <= other else (other, me)
                if key not in self._equiv:
                    self._equiv[key] = actionables_equivalent(sx, a, self.states[sid], b, self.cfg.frag, self.memo)
                if self._equiv[key]:
                    members.append(other)
        return members

    def to_dict(self) -> dict:
        return {
            "app": self.app_name,
            "baseUrl": self.base_url,
            "config": self.cfg.to_dict(),
            "states": [{"stateId": sid, "url": s.url, "file": f"states/{sid}.json"} for sid, s in self.states.items()],
            "transitions": [t.to_dict() for t in self.transitions],
            "paths": [p.to_dict() for p in self.paths],
            "explored": sorted([list(k) for k in self.explored]),
            "unreachable": sorted(self.unreachable),
            "stoppedBy": self.stopped_by,
            "audit": self.audit,
        }


# ============================================================================
# SCORING
# ============================================================================

def actionables_equivalent(sx: StateSnapshot, ax: Actionable, sy: StateSnapshot, ay: Actionable,
                           frag_cfg: Optional[FragConfig] = None, memo: Optional[FragmentMemo] = None) -> bool:
    """Same relative locator inside closest fragments that classify Clone or Nd2."""
    fx = closest(ax.node_id, sx.root_fragment(frag_cfg))
    fy = closest(ay.node_id, sy.root_fragment(frag_cfg))
    if relative_locator(ax.node_id, fx) != relative_locator(ay.node_id, fy):
        return False
    return is_near_clone(fx, fy, memo)


def score_actionable(a: Actionable, state_id: str, model: AppModel, cfg: Optional[CrawlConfig] = None) -> float:
    cfg = cfg or model.cfg
    if (state_id, a.locator) in model.explored:
        return -1
    members = model.equivalence_class(state_id, a)
    if any(m in model.explored for m in members):
        return 0
    return cfg.c0 * len(members)


def score_state(state_id: str, model: AppModel, cfg: Optional[CrawlConfig] = None) -> float:
    return sum(score_actionable(a, state_id, model, cfg) for a in model.actionables[state_id])


def _eligible(score: float, cfg: CrawlConfig) -> bool:
    return score > 0 or (cfg.explore_skipped_duplicates and score == 0)


def _pick_actionable(model: AppModel, state_id: str, cfg: CrawlConfig) -> Optional[Actionable]:
    best, best_score = None, None
    for a in model.actionables[state_id]:
        score = score_actionable(a, state_id, model, cfg)
        if _eligible(score, cfg) and (best_score is None or score > best_score):
            best, best_score = a, score
    return best


def _pick_backtrack_target(model: AppModel, cfg: CrawlConfig) -> Optional[str]:
    best, best_score = None, None
    for sid in model.states:
        if sid in model.unreachable:
            continue
        if not any(_eligible(score_actionable(a, sid, model, cfg), cfg) for a in model.actionables[sid]):
            continue
        score = score_state(sid, model, cfg)
        if best_score is None or score > best_score:
            best, best_score = sid, score
    return best


# ============================================================================
# CRAWL
# ============================================================================

def _baseline_match(saf: WholePageSAF, snap: StateSnapshot, state: StateSnapshot) -> bool:
    """Identical pages, or a whole-page Clone. A whole-page Nd never merges."""
    if snap.uid == state.uid:
        return True
    return gamma_of(saf, page_distance(saf.kind, snap, state, bound=saf.t_c)) == Gamma.CLONE


def _match_state(model: AppModel, snap: StateSnapshot, cfg: CrawlConfig) -> Tuple[Optional[str], str]:
    """First Clone match in discovery order, else first Nd2 match, else (None, 'new')."""
    if cfg.baseline is not None:
        if cfg.baseline.kind == "visual":
            # the cached signature is all later comparisons need
            page_signature(snap)
            snap.release_raster()
        for sid, s in model.states.items():
            if _baseline_match(cfg.baseline, snap, s):
                return sid, Gamma.CLONE.value
        return None, "new"
    near = None
    root = snap.root_fragment(cfg.frag)
    for sid, s in model.states.items():
        other = s.root_fragment(cfg.frag)
        if fragment_shape(root) != fragment_shape(other):
            continue
        label = classify(root, other, model.memo)
        if label == ClassLabel.CLONE:
            return sid, label.value
        if label == ClassLabel.ND2 and near is None:
            near = sid
    return (near, ClassLabel.ND2.value) if near else (None, "new")


def _integrate(model: AppModel, snap: StateSnapshot, cfg: CrawlConfig) -> Tuple[str, str]:
    sid, relation = _match_state(model, snap, cfg)
    if sid is not None:
        if relation == ClassLabel.ND2.value:
            observe_state(model.memo, snap)
        return sid, relation
    sid = model.add_state(snap)
    if model.memo is not None:
        register_state(model.memo, model.states[sid])
    logger.info(f"[new-state] {sid} {snap.url} ({len(model.actionables[sid])} actionables)")
    return sid, "new"


def _begin_path(session: Session, model: AppModel, cfg: CrawlConfig) -> str:
    session.reset()
    snap = session.load_url()
    sid, relation = _integrate(model, snap, cfg)
    model.paths.append(ExplorationPath(start=sid))
    logger.debug(f"[load] {snap.url} -> {sid} ({relation})")
    return sid


def _record(model: AppModel, kind: str, t: ModelTransition, cfg: CrawlConfig) -> None:
    entry = {"step": len(model.audit) + 1, "kind": kind, **t.to_dict()}
    if kind == "explore":
        source_actionable = next(a for a in model.actionables[t.source] if a.locator == t.locator)
        entry["classScores"] = {
            f"{sid} {loc}": score_actionable(next(a for a in model.actionables[sid] if a.locator == loc), sid, model, cfg)
            for sid, loc in model.equivalence_class(t.source, source_actionable)
        }
    model.audit.append(entry)


def _explore(session: Session, model: AppModel, current: str, a: Actionable, cfg: CrawlConfig) -> str:
    snap = session.fire(a)
    target, relation = _integrate(model, snap, cfg)
    model.explored.add((current, a.locator))
    t = model.add_transition(current, a, target, relation)
    model.paths[-1].transitions.append(t.tid)
    _record(model, "explore", t, cfg)
    logger.info(f"[fire] {t.tid}: {current} --{a.label or a.locator}--> {target} ({relation})")
    return target


def _backtrack(session: Session, model: AppModel, target: str, cfg: CrawlConfig, counts: dict) -> str:
    """
    Reset the app, then replay the shortest recorded route to target.

    Raises:
        BacktrackFailed: no route exists, a step no longer resolves, or the
            final page does not match the target state
    """
    logger.info(f"[backtrack] to {target}")
    current = _begin_path(session, model, cfg)
    route = model.shortest_route(current, target)
    if route is None:
        raise BacktrackFailed(f"no recorded route from {current} to {target}")
    snap = session.current
    for tid in route:
        t = model.transition(tid)
        try:
            snap = session.fire(t.locator)
        except StaleActionable as e:
            raise BacktrackFailed(f"replay of {tid} failed: {e}") from e
        counts["actions"] += 1
        counts["replayed"] += 1
        model.paths[-1].transitions.append(tid)
        _record(model, "replay", t, cfg)
    if route:
        expected = model.states[target]
        if cfg.baseline is not None:
            ok = _baseline_match(cfg.baseline, snap, expected)
        else:
            ok = classify(snap.root_fragment(cfg.frag), expected.root_fragment(cfg.frag), model.memo) in NEAR_CLONE
        if not ok:
            raise BacktrackFailed(f"replayed route {route} did not reach {target}")
    return target


def _stop_reason(model: AppModel, cfg: CrawlConfig, counts: dict, started: float) -> Optional[str]:
    if cfg.max_actions is not None and counts["actions"] >= cfg.max_actions:
        return "max_actions"
    if cfg.max_states is not None and len(model.states) >= cfg.max_states:
        return "max_states"
    if cfg.max_duration is not None and time.monotonic() - started >= cfg.max_duration:
        return "max_duration"
    return None


def crawl(app: SimApp, cfg: Optional[CrawlConfig] = None) -> AppModel:
    """Explore app until nothing eligible remains or a stopping criterion fires."""
    cfg = cfg or CrawlConfig()
    session = Session(app, seed=cfg.seed)
    model = AppModel(app.name, app.base_url, cfg)
    counts = {"actions": 0, "replayed": 0, "backtracks": 0, "backtrack_failed": 0, "stale": 0}
    started = time.monotonic()

    current = _begin_path(session, model, cfg)
    while True:
        reason = _stop_reason(model, cfg, counts, started)
        if reason:
            break
        a = _pick_actionable(model, current, cfg)
        if a is None:
            target = _pick_backtrack_target(model, cfg)
            if target is None:
                reason = "exhausted"
                break
            counts["backtracks"] += 1
            try:
                current = _backtrack(session, model, target, cfg, counts)
            except BacktrackFailed as e:
                counts["backtrack_failed"] += 1
                model.unreachable.add(target)
                logger.error(f"[backtrack-failed] {target} ({e})")
                current = _begin_path(session, model, cfg)
            continue
        try:
            current = _explore(session, model, current, a, cfg)
        except StaleActionable as e:
            counts["stale"] += 1
            model.explored.add((current, a.locator))
            logger.error(f"[error] {current} {a.locator} ({e})")
            current = _begin_path(session, model, cfg)
            continue
        counts["actions"] += 1

    model.stopped_by = reason
    non_empty = [p for p in model.paths if p.transitions]
    model.paths = non_empty or model.paths[:1]
    logger.info(
        f"crawl summary: states={len(model.states)}, transitions={len(model.transitions)}, "
        f"actions={counts['actions']}, backtracks={counts['backtracks']}, "
        f"backtrack_failed={counts['backtrack_failed']}, stopped_by={reason}"
    )
    return model


def model_duplicate_pairs(model: AppModel) -> List[Tuple[str, str, str]]:
    """Model state pairs that classify as anything but Distinct against each other."""
    ids = list(model.states)
    pairs = []
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            label = classify(model.states[a].root_fragment(model.cfg.frag),
                             model.states[b].root_fragment(model.cfg.frag), model.memo, model.cfg.compare)
            if label != ClassLabel.DISTINCT:
                pairs.append((a, b, label.value))
    return pairs


# ============================================================================
# PERSISTENCE
# ============================================================================

def save_model(model: AppModel, outdir: Path) -> Path:
    """Write model.json, memo.json and one snapshot file per state under outdir."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for sid, snap in model.states.items():
        save_snapshot(snap, outdir / "states" / f"{sid}.json")
    (outdir / "model.json").write_text(json.dumps(model.to_dict(), indent=1), encoding="utf-8")
    if model.memo is not None:
        (outdir / "memo.json").write_text(json.dumps(model.memo.to_dict(), indent=1), encoding="utf-8")
    return outdir / "model.json"


def load_model(path: Path) -> AppModel:
    """
    Load a saved model from its directory (or its model.json).

    Raises:
        ParseError: model.json or a referenced file is missing or malformed
    """
    path = Path(path)
    outdir = path if path.is_dir() else path.parent
    try:
        data = json.loads((outdir / "model.json").read_text(encoding="utf-8"))
        cfg = CrawlConfig.from_dict(data.get("config") or {})
    except (OSError, json.JSONDecodeError, TypeError) as e:
        raise ParseError(f"cannot read model in {outdir}: {e}") from e
    model = AppModel(data.get("app", ""), data.get("baseUrl", ""), cfg)
    for entry in data.get("states", []):
        snap = load_snapshot(outdir / entry["file"])
        sid = entry["stateId"]
        model.states[sid] = snap if snap.state_id == sid else snap.renamed(sid)
        model.actionables[sid] = extract_actionables(model.states[sid], cfg.tag_set)
    for t in data.get("transitions", []):
        model.transitions.append(ModelTransition(
            tid=t["id"], source=t["source"], locator=t["locator"], target=t["target"],
            label=t.get("label", ""), relation=t.get("relation", "new")))
    known = set(model.states)
    for t in model.transitions:
        if t.source not in known or t.target not in known:
            raise ParseError(f"transition {t.tid} refers to an unknown state")
    model.paths = [ExplorationPath(p["start"], list(p.get("transitions", []))) for p in data.get("paths", [])]
    model.explored = {tuple(k) for k in data.get("explored", [])}
    model.unreachable = set(data.get("unreachable", []))
    model.stopped_by = data.get("stoppedBy")
    model.audit = list(data.get("audit", []))
    memo_path = outdir / "memo.json"
    if memo_path.exists() and cfg.baseline is None:
        try:
            memo_data = json.loads(memo_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ParseError(f"cannot read memo {memo_path}: {e}") from e
        model.memo = FragmentMemo.from_dict(memo_data, model.states)
    return model
