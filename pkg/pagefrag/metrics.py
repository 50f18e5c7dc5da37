# metrics.py
"""
Classification and model-quality scoring, and the threshold search for the
whole-page baselines.

Labeled pairs are a CSV with columns id1,id2,label where label is one of
Cl, Nd2, Nd3, Di. Scores collapse Nd2 and Nd3 into a single Nd class.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from pagefrag.comparison import ClassLabel, classify
from pagefrag.config import CompareConfig, FragConfig
from pagefrag.errors import EmptyGroundTruth, EmptyModel, InvalidConfig, LengthMismatch, ParseError
from pagefrag.harness import SAF_KINDS, Gamma, WholePageSAF, gamma_of, page_distance
from pagefrag.rng import DeterministicRNG
from pagefrag.snapshot import StateSnapshot, load_snapshot

logger = logging.getLogger(__name__)

CLASSES = ("Cl", "Nd", "Di")
PAIR_LABELS = ("Cl", "Nd2", "Nd3", "Di")
MAPPED_LABELS = frozenset({ClassLabel.CLONE, ClassLabel.ND2, ClassLabel.ND3})

_COLLAPSE = {
    "cl": "Cl", "clone": "Cl",
    "nd": "Nd", "nd2": "Nd", "nd3": "Nd", "nd2-data": "Nd", "nd3-struct": "Nd",
    "di": "Di", "distinct": "Di",
}


def collapse_label(label) -> str:
    """Cl, Nd or Di for a ClassLabel, Gamma or label string."""
    text = label.value if isinstance(label, (ClassLabel, Gamma)) else str(label)
    try:
        return _COLLAPSE[text.strip().lower()]
    except KeyError:
        raise ParseError(f"unknown class label {label!r}") from None


def per_class_f1(predictions: Sequence, truth: Sequence, classes: Sequence[str] = CLASSES) -> Dict[str, float]:
    """F1 per class; classes absent from both sides are left out."""
    if len(predictions) != len(truth):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(truth)} labels")
    p = np.array([collapse_label(x) for x in predictions], dtype=object)
    t = np.array([collapse_label(x) for x in truth], dtype=object)
    scores = {}
    for c in classes:
        tp = int(np.sum((p == c) & (t == c)))
        fp = int(np.sum((p == c) & (t != c)))
        fn = int(np.sum((p != c) & (t == c)))
        if tp + fp + fn == 0:
            continue
        scores[c] = 2 * tp / (2 * tp + fp + fn)
    return scores


def multiclass_f1(predictions: Sequence, truth: Sequence, classes: Sequence[str] = CLASSES) -> float:
    """
    Unweighted macro average of per-class F1 over the classes present in
    truth or predictions. Empty input scores 0.

    Raises:
        LengthMismatch: predictions and truth differ in length
    """
    scores = per_class_f1(predictions, truth, classes)
    return float(np.mean(list(scores.values()))) if scores else 0.0


# ============================================================================
# MODEL QUALITY
# ============================================================================

@dataclass
class GroundTruth:
    states: Dict[str, StateSnapshot]
    # model stateId -> ground-truth stateId (None: maps to nothing)
    overrides: Dict[str, Optional[str]] = field(default_factory=dict)


def load_ground_truth(directory: Path) -> GroundTruth:
    """
    Snapshots *.json of a directory plus an optional mapping.csv with columns
    model_state,gt_state (empty gt_state means unmapped).

    Raises:
        EmptyGroundTruth: the directory holds no snapshot
    """
    directory = Path(directory)
    states = load_snapshots(directory)
    if not states:
        raise EmptyGroundTruth(f"no ground-truth snapshots in {directory}")
    overrides: Dict[str, Optional[str]] = {}
    mapping = directory / "mapping.csv"
    if mapping.exists():
        df = pd.read_csv(mapping, dtype=str, keep_default_na=False)
        if not {"model_state", "gt_state"} <= set(df.columns):
            raise ParseError(f"{mapping} needs columns model_state,gt_state")
        for model_state, gt_state in zip(df["model_state"], df["gt_state"]):
            if gt_state and gt_state not in states:
                raise ParseError(f"{mapping}: unknown ground-truth state {gt_state!r}")
            overrides[model_state] = gt_state or None
    return GroundTruth(states=states, overrides=overrides)


def auto_mapper(frag_cfg: Optional[FragConfig] = None,
                compare_cfg: Optional[CompareConfig] = None) -> Callable[[StateSnapshot, GroundTruth], Optional[str]]:
    """First ground-truth state (in gt order) classifying Clone, Nd2 or Nd3 against the model state."""
    def mapper(state: StateSnapshot, gt: GroundTruth) -> Optional[str]:
        root = state.root_fragment(frag_cfg)
        for gid, g in gt.states.items():
            if classify(root, g.root_fragment(frag_cfg), cfg=compare_cfg) in MAPPED_LABELS:
                return gid
        return None
    return mapper


def model_precision_recall(model, gt: GroundTruth, mapper=None) -> Tuple[float, float, float]:
    """
    Precision = covered gt states / model states, recall = covered gt states /
    gt states, F1 their harmonic mean (0 when either is 0).

    Raises:
        EmptyModel, EmptyGroundTruth
    """
    if not model.states:
        raise EmptyModel("model has no states")
    if not gt.states:
        raise EmptyGroundTruth("ground truth has no states")
    mapper = mapper or auto_mapper(model.cfg.frag, model.cfg.compare)
    covered = set()
    for sid, state in model.states.items():
        gid = gt.overrides[sid] if sid in gt.overrides else mapper(state, gt)
        logger.debug(f"[mapped] {sid} -> {gid}")
        if gid is not None:
            covered.add(gid)
    pr = len(covered) / len(model.states)
    re = len(covered) / len(gt.states)
    f1 = 0.0 if pr * re == 0 else 2 * pr * re / (pr + re)
    return pr, re, f1


# ============================================================================
# LABELED PAIRS
# ============================================================================

def load_snapshots(directory: Path) -> Dict[str, StateSnapshot]:
    """Every *.json snapshot of a directory keyed by stateId (file stem when empty)."""
    snaps = {}
    for path in sorted(Path(directory).glob("*.json")):
        snap = load_snapshot(path)
        snaps[snap.state_id or path.stem] = snap
    return snaps


def load_labeled_pairs(path: Path) -> pd.DataFrame:
    """
    Raises:
        ParseError: missing columns or a label outside Cl, Nd2, Nd3, Di
    """
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError) as e:
        raise ParseError(f"cannot read labeled pairs {path}: {e}") from e
    if not {"id1", "id2", "label"} <= set(df.columns):
        raise ParseError(f"{path} needs columns id1,id2,label")
    bad = sorted(set(df["label"]) - set(PAIR_LABELS))
    if bad:
        raise ParseError(f"{path}: unknown labels {bad}")
    return df[["id1", "id2", "label"]].reset_index(drop=True)


def _pair_snapshots(pairs: pd.DataFrame, snapshots: Mapping[str, StateSnapshot]):
    missing = sorted((set(pairs["id1"]) | set(pairs["id2"])) - set(snapshots))
    if missing:
        raise ParseError(f"labeled pairs refer to unknown snapshots {missing}")
    return [(snapshots[a], snapshots[b]) for a, b in zip(pairs["id1"], pairs["id2"])]


def pair_distances(kind: str, pairs: pd.DataFrame, snapshots: Mapping[str, StateSnapshot]) -> np.ndarray:
    if kind not in SAF_KINDS:
        raise InvalidConfig(f"distance kind must be one of {SAF_KINDS}, got {kind!r}")
    return np.array([page_distance(kind, a, b) for a, b in _pair_snapshots(pairs, snapshots)], dtype=float)


def evaluate_pairs(pairs: pd.DataFrame, snapshots: Mapping[str, StateSnapshot],
                   safs: Sequence[WholePageSAF] = (), frag_cfg: Optional[FragConfig] = None,
                   compare_cfg: Optional[CompareConfig] = None) -> Tuple[pd.DataFrame, Dict[str, float]]:
    """Predictions of the fragment classifier and each whole-page SAF, with their F1."""
    table = pairs.copy()
    snaps = _pair_snapshots(pairs, snapshots)
    table["fragment"] = [classify(a.root_fragment(frag_cfg), b.root_fragment(frag_cfg), cfg=compare_cfg).value
                         for a, b in snaps]
    scores = {"fragment": multiclass_f1(table["fragment"], table["label"])}
    for saf in safs:
        d = pair_distances(saf.kind, pairs, snapshots)
        table[f"{saf.kind}_distance"] = d
        table[saf.kind] = [gamma_of(saf, x).value for x in d]
        scores[saf.kind] = multiclass_f1(table[saf.kind], table["label"])
    return table, scores


# ============================================================================
# THRESHOLD SEARCH
# ============================================================================

def candidate_cuts(distances: Sequence[float]) -> List[float]:
    """Midpoints between sorted unique distances, plus both ends."""
    u = np.unique(np.asarray(distances, dtype=float))
    if len(u) == 0:
        return [0.0]
    mids = ((u[:-1] + u[1:]) / 2).tolist()
    return [0.0] + mids + [float(u[-1]) + 1.0]


def search_thresholds(distances: Sequence[float], truth: Sequence, budget: int,
                      seed: int) -> Tuple[float, float, float, pd.DataFrame]:
    """
    Seeded search for (t_c, t_n) maximizing multi-class F1. The first half of
    the budget samples random cut pairs; the rest climbs to neighbouring cuts
    of the best pair so far. Stops early once every pair was tried.

    Returns:
        (t_c, t_n, best F1, trace) with one trace row per trial
    """
    if budget < 1:
        raise InvalidConfig(f"budget must be >= 1, got {budget}")
    d = np.asarray(distances, dtype=float)
    if len(d) != len(truth):
        raise LengthMismatch(f"{len(d)} distances for {len(truth)} labels")
    cuts = candidate_cuts(d)
    m = len(cuts)
    rng = DeterministicRNG(seed, "thresholds")
    tried: Dict[Tuple[int, int], float] = {}
    rows = []
    best: Optional[Tuple[int, int]] = None

    def evaluate(i: int, j: int, phase: str) -> None:
        nonlocal best
        pred = np.where(d < cuts[i], "Cl", np.where(d > cuts[j], "Di", "Nd"))
        score = multiclass_f1(pred, truth)
        tried[(i, j)] = score
        if best is None or score > tried[best]:
            best = (i, j)
        rows.append({"trial": len(rows) + 1, "phase": phase, "t_c": cuts[i], "t_n": cuts[j],
                     "f1": score, "best_so_far": tried[best]})

    def random_pair() -> Tuple[int, int]:
        i, j = rng.randbelow(m), rng.randbelow(m)
        return (i, j) if i <= j else (j, i)

    n_random = (budget + 1) // 2
    for _ in range(n_random):
        evaluate(*random_pair(), "random")

    total = m * (m + 1) // 2
    while len(rows) < budget and len(tried) < total:
        bi, bj = best
        step = next(((i, j) for i, j in ((bi - 1, bj), (bi + 1, bj), (bi, bj - 1), (bi, bj + 1))
                     if 0 <= i <= j < m and (i, j) not in tried), None)
        if step is not None:
            evaluate(*step, "ascent")
            continue
        # local optimum: jump to an untried pair
        for _ in range(32):
            candidate = random_pair()
            if candidate not in tried:
                evaluate(*candidate, "jump")
                break
        else:
            untried = next(((i, j) for i in range(m) for j in range(i, m) if (i, j) not in tried))
            evaluate(*untried, "jump")

    bi, bj = best
    trace = pd.DataFrame(rows, columns=["trial", "phase", "t_c", "t_n", "f1", "best_so_far"])
    logger.info(f"threshold search: trials={len(rows)}, best f1={tried[best]:.4f} at t_c={cuts[bi]:.4f}, t_n={cuts[bj]:.4f}")
    return cuts[bi], cuts[bj], tried[best], trace


def tune_thresholds(kind: str, pairs: pd.DataFrame, snapshots: Mapping[str, StateSnapshot], budget: int,
                    seed: int) -> Tuple[float, float, float, pd.DataFrame]:
    distances = pair_distances(kind, pairs, snapshots)
    return search_thresholds(distances, list(pairs["label"]), budget, seed)


def interval_maxima(trace: pd.DataFrame, width: int) -> pd.DataFrame:
    """Best F1 found inside each block of `width` trials, plus the running best at its end."""
    if width < 1:
        raise InvalidConfig(f"interval width must be >= 1, got {width}")
    if trace.empty:
        return pd.DataFrame(columns=["interval", "first_trial", "last_trial", "max_f1", "best_so_far"])
    grouped = trace.assign(interval=(trace["trial"] - 1) // width).groupby("interval")
    out = grouped.agg(first_trial=("trial", "min"), last_trial=("trial", "max"),
                      max_f1=("f1", "max"), best_so_far=("best_so_far", "last"))
    return out.reset_index()
