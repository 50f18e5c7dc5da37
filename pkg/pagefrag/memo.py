# memo.py
"""
Crawl-wide map of unique fragments to their duplicates.

Every registration of a useful fragment is recorded once, either as a
representative (unique) or as a Clone/Nd2 duplicate of one. Fragments of
discarded near-duplicate snapshots are kept as observed Nd2 relations of the
representative they matched. A representative is data-fluid iff it has at
least one recorded Nd2 relation; its clones inherit the flag through the
representative.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Set, Tuple

from pagefrag.comparison import ClassLabel, classify, fragment_shape
from pagefrag.config import CompareConfig, FragConfig
from pagefrag.errors import ParseError, UnregisteredFragment
from pagefrag.fragmentation import Fragment
from pagefrag.snapshot import StateSnapshot

logger = logging.getLogger(__name__)

FragKey = Tuple[str, int]


def format_key(key: FragKey) -> str:
    return f"{key[0]}#{key[1]}"


def parse_key(text: str) -> FragKey:
    state_id, sep, frag_id = text.rpartition("#")
    if not sep or not frag_id.isdigit():
        raise ParseError(f"bad fragment key {text!r}")
    return state_id, int(frag_id)


@dataclass
class RegistrationReport:
    state_id: str
    new_uniques: List[FragKey] = field(default_factory=list)
    new_duplicates: List[Tuple[FragKey, FragKey, str]] = field(default_factory=list)
    newly_fluid: List[FragKey] = field(default_factory=list)


class FragmentMemo:
    """Unique fragments, their duplicate lists, data-fluid flags and cached classifications."""

    def __init__(self, compare_cfg: Optional[CompareConfig] = None, frag_cfg: Optional[FragConfig] = None):
        self.compare_cfg = compare_cfg or CompareConfig()
        self.frag_cfg = frag_cfg or FragConfig()
        self.uniques: List[Fragment] = []
        self.duplicates_of: Dict[FragKey, List[Tuple[Fragment, ClassLabel]]] = {}
        self.data_fluid: Set[FragKey] = set()
        # representative -> "digest#fragId" of fragments seen in discarded snapshots
        self.observed: Dict[FragKey, List[str]] = {}
        # (ident, ident) -> ClassLabel, shared with comparison.classify
        self.results: dict = {}
        self._rep: Dict[FragKey, FragKey] = {}
        self._by_shape: Dict[str, List[Fragment]] = {}

    def __len__(self) -> int:
        return len(self._rep)

    def __contains__(self, f: Fragment) -> bool:
        return f.key in self._rep

    @property
    def duplicate_count(self) -> int:
        return sum(len(v) for v in self.duplicates_of.values())

    def nd2_relations(self, key: FragKey) -> int:
        """Recorded Nd2 relations of a representative, registered and observed."""
        registered = sum(1 for _, label in self.duplicates_of.get(key, []) if label == ClassLabel.ND2)
        return registered + len(self.observed.get(key, []))

    def representative(self, f: Fragment) -> FragKey:
        try:
            return self._rep[f.key]
        except KeyError:
            raise UnregisteredFragment(f"fragment {f.label} was never registered") from None

    def _add_unique(self, f: Fragment) -> None:
        self.uniques.append(f)
        self.duplicates_of[f.key] = []
        self._rep[f.key] = f.key
        self._by_shape.setdefault(fragment_shape(f), []).append(f)

    def _match(self, f: Fragment) -> Tuple[Optional[Fragment], Optional[ClassLabel]]:
        """First Clone among same-shape uniques, else first Nd2, else (None, None)."""
        nd2 = None
        # a different pruned shape can only classify Nd3 or Distinct
        for u in self._by_shape.get(fragment_shape(f), []):
            label = classify(f, u, self)
            if label == ClassLabel.CLONE:
                return u, label
            if label == ClassLabel.ND2 and nd2 is None:
                nd2 = u
        return (nd2, ClassLabel.ND2) if nd2 is not None else (None, None)

    def _mark_fluid(self, key: FragKey, report_list: List[FragKey]) -> None:
        if key not in self.data_fluid:
            self.data_fluid.add(key)
            report_list.append(key)

    def to_dict(self) -> dict:
        return {
            "fragConfig": self.frag_cfg.to_dict(),
            "compareConfig": self.compare_cfg.to_dict(),
            "uniques": [format_key(u.key) for u in self.uniques],
            "duplicatesOf": {
                format_key(k): [[format_key(f.key), label.value] for f, label in dups]
                for k, dups in self.duplicates_of.items()
            },
            "dataFluid": sorted(format_key(k) for k in self.data_fluid),
            "observedNd2": {format_key(k): list(v) for k, v in self.observed.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping, states: Mapping[str, StateSnapshot]) -> "FragmentMemo":
        """
        Rebuild a memo against already loaded model states.

        Raises:
            ParseError: a key names an unknown state or fragment
        """
        try:
            memo = cls(CompareConfig(**data.get("compareConfig", {})), FragConfig(**data.get("fragConfig", {})))
        except TypeError as e:
            raise ParseError(f"bad memo config: {e}") from e

        def resolve(text: str) -> Fragment:
            state_id, frag_id = parse_key(text)
            if state_id not in states:
                raise ParseError(f"memo refers to unknown state {state_id!r}")
            f = states[state_id].root_fragment(memo.frag_cfg).find(frag_id)
            if f is None or not f.useful:
                raise ParseError(f"memo refers to unknown fragment {text!r}")
            return f

        for text in data.get("uniques", []):
            memo._add_unique(resolve(text))
        for rep_text, dups in (data.get("duplicatesOf") or {}).items():
            rep_key = parse_key(rep_text)
            if rep_key not in memo.duplicates_of:
                raise ParseError(f"duplicate list for non-unique {rep_text!r}")
            for dup_text, label in dups:
                f = resolve(dup_text)
                memo.duplicates_of[rep_key].append((f, ClassLabel.parse(label)))
                memo._rep[f.key] = rep_key
        for rep_text, seen in (data.get("observedNd2") or {}).items():
            rep_key = parse_key(rep_text)
            if rep_key not in memo.duplicates_of:
                raise ParseError(f"observed relations for non-unique {rep_text!r}")
            memo.observed[rep_key] = list(seen)
        memo.data_fluid = {parse_key(t) for t in data.get("dataFluid", [])}
        return memo


def register_state(memo: FragmentMemo, s: StateSnapshot) -> RegistrationReport:
    """
    Record every useful fragment of a newly added model state.

    Each fragment is compared against the uniques in insertion order. A Clone
    match wins over an Nd2 match; an Nd2 match marks the representative
    data-fluid; no match makes the fragment a new unique. A fragment that is
    already registered is a Clone of its earlier registration and is recorded
    as a Clone duplicate of its representative.
    """
    report = RegistrationReport(state_id=s.state_id)
    for f in s.root_fragment(memo.frag_cfg).useful_fragments():
        if f.key in memo._rep:
            rep_key = memo._rep[f.key]
            memo.duplicates_of[rep_key].append((f, ClassLabel.CLONE))
            report.new_duplicates.append((f.key, rep_key, ClassLabel.CLONE.value))
            continue
        rep, label = memo._match(f)
        if rep is None:
            memo._add_unique(f)
            report.new_uniques.append(f.key)
            continue
        memo.duplicates_of[rep.key].append((f, label))
        memo._rep[f.key] = rep.key
        report.new_duplicates.append((f.key, rep.key, label.value))
        if label == ClassLabel.ND2:
            memo._mark_fluid(rep.key, report.newly_fluid)

    logger.debug(
        f"[memo] {s.state_id}: uniques+{len(report.new_uniques)} "
        f"duplicates+{len(report.new_duplicates)} fluid+{len(report.newly_fluid)}"
    )
    return report


def observe_state(memo: FragmentMemo, s: StateSnapshot) -> List[FragKey]:
    """
    Collect fluidity evidence from a snapshot that was discarded as a
    near-duplicate. The snapshot is not registered; each of its fragments that
    matches a representative as Nd2 (and as no Clone) is kept as an observed
    Nd2 relation of that representative, which becomes data-fluid.
    """
    newly: List[FragKey] = []
    for f in s.root_fragment(memo.frag_cfg).useful_fragments():
        rep, label = memo._match(f)
        if label != ClassLabel.ND2:
            continue
        seen = memo.observed.setdefault(rep.key, [])
        tag = f"{s.uid[:16]}#{f.frag_id}"
        if tag not in seen:
            seen.append(tag)
        memo._mark_fluid(rep.key, newly)
    if newly:
        logger.debug(f"[memo] {s.state_id or s.url}: newly fluid {[format_key(k) for k in newly]}")
    return newly


def is_data_fluid(memo: FragmentMemo, f: Fragment) -> bool:
    return memo.representative(f) in memo.data_fluid
