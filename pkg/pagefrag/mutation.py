# mutation.py
"""
DOM mutation operators over recorded model states and the oracle scoring
experiment built on them.

Operators:
    Attribute  append "Mut" to the id, class or title value of a node
    Tag        rename h1..h6, span or p to a similar tag (SIMILAR_TAGS)
    Subtree    delete every child of a div, table, tr, td, ul, li or p
    Text       append "Mut" to the text of an h1..h6, p, b or i leaf

Each mutant stands in for the expected state of an assert and is checked
against the trace snapshot of the same state. Mutants whose rasters differ
from the original are visible and should be detected; the rest are
equivalent and should be tolerated.
"""

import logging
from dataclasses import asdict, dataclass
from typing import List, Mapping, Optional, Sequence, Tuple

import pandas as pd

from pagefrag.errors import InvalidConfig, MisalignedTrace, NoEligibleNode, PageFragError
from pagefrag.harness import WholePageSAF, gamma_classify
from pagefrag.raster import rasterize
from pagefrag.rng import DeterministicRNG
from pagefrag.snapshot import StateSnapshot, build_dom
from pagefrag.testgen import GAMMA_VERDICTS, OraclePolicy, Verdict, assert_state

logger = logging.getLogger(__name__)

OPERATORS = ("Attribute", "Tag", "Subtree", "Text")
SAMPLED_OPERATORS = ("None",) + OPERATORS

ATTRIBUTE_NAMES = ("id", "class", "title")
SIMILAR_TAGS = {
    "h1": "h2", "h2": "h3", "h3": "h4", "h4": "h5", "h5": "h6", "h6": "h1",
    "span": "p", "p": "span",
}
CONTAINER_TAGS = ("div", "table", "tr", "td", "ul", "li", "p")
TEXT_TAGS = ("h1", "h2", "h3", "h4", "h5", "h6", "p", "b", "i")
MUT_SUFFIX = "Mut"

ORACLES = ("fragment-nomem", "fragment-mem", "structural", "visual")
DEFAULT_BASELINES = {
    "structural": WholePageSAF("structural", 0.01, 0.15),
    "visual": WholePageSAF("visual", 0.001, 0.05),
}


@dataclass(frozen=True)
class Mutation:
    operator: str
    state_id: str
    target: Optional[int]
    before: Optional[str]
    after: Optional[str]
    visible: bool

    @property
    def category(self) -> str:
        """None, Visible, Attribute (invisible attribute edit) or Invisible."""
        if self.operator == "None":
            return "None"
        if self.visible:
            return "Visible"
        return "Attribute" if self.operator == "Attribute" else "Invisible"

    def to_dict(self) -> dict:
        return asdict(self)


def eligible_nodes(s: StateSnapshot, op: str) -> List[int]:
    nodes = s.dom.nodes
    if op == "Attribute":
        return [nid for nid in s.dom.order if any(a in nodes[nid].attributes for a in ATTRIBUTE_NAMES)]
    if op == "Tag":
        return [nid for nid in s.dom.order if nodes[nid].tag in SIMILAR_TAGS]
    if op == "Subtree":
        return [nid for nid in s.dom.order if nodes[nid].tag in CONTAINER_TAGS and nodes[nid].children]
    if op == "Text":
        return [nid for nid in s.dom.order
                if nodes[nid].tag in TEXT_TAGS and not nodes[nid].children and nodes[nid].text]
    raise InvalidConfig(f"unknown mutation operator {op!r}")


def _descendants(records: List[dict], nid: int) -> List[int]:
    out, stack = [], list(records[nid]["children"])
    while stack:
        c = stack.pop()
        out.append(c)
        stack.extend(records[c]["children"])
    return out


def mutate(s: StateSnapshot, op: str, seed: int) -> Tuple[StateSnapshot, Mutation]:
    """
    Apply one operator to one seeded-random eligible node of s.

    Raises:
        NoEligibleNode: s has no node the operator applies to
        InvalidConfig: unknown operator
    """
    candidates = eligible_nodes(s, op)
    if not candidates:
        raise NoEligibleNode(f"{op} has no eligible node in {s.state_id}")
    nid = DeterministicRNG(seed, f"mutate/{op}").choice(candidates)
    records = s.dom.to_records()
    rec = records[nid]

    if op == "Attribute":
        name = next(a for a in ATTRIBUTE_NAMES if a in rec["attrs"])
        before = rec["attrs"][name]
        rec["attrs"][name] = before + MUT_SUFFIX
        before, after = f'{name}="{before}"', f'{name}="{rec["attrs"][name]}"'
    elif op == "Tag":
        before, after = rec["tag"], SIMILAR_TAGS[rec["tag"]]
        rec["tag"] = after
    elif op == "Subtree":
        dropped = set(_descendants(records, nid))
        before, after = f"{len(dropped)} descendant(s)", "0 descendants"
        rec["children"] = []
        records = [r for r in records if r["id"] not in dropped]
    else:
        before = rec["text"]
        after = rec["text"] = before + MUT_SUFFIX

    mutant = StateSnapshot(state_id=f"{s.state_id}~{op.lower()}{nid}", url=s.url,
                           dom=build_dom(records, 0), viewport=s.viewport)
    original = s.raster if s.screenshot is None else rasterize(s.dom, *s.viewport)
    mutation = Mutation(operator=op, state_id=s.state_id, target=nid, before=before, after=after,
                        visible=not original.same_pixels(mutant.raster))
    return mutant, mutation


def _judge(oracle: str, expected: StateSnapshot, observed: StateSnapshot, original: StateSnapshot,
           model, policy: OraclePolicy, baselines: Mapping[str, WholePageSAF]) -> Tuple[str, str]:
    if oracle in ("fragment-nomem", "fragment-mem"):
        memo = model.memo if oracle == "fragment-mem" else None
        v = assert_state(expected, observed, memo, model.cfg.frag, model.cfg.compare,
                         fluid_root=original.root_fragment(model.cfg.frag))
        return v.classification, v.level.value
    if oracle in baselines:
        gamma = gamma_classify(baselines[oracle], expected, observed)
        return gamma.value, GAMMA_VERDICTS[gamma].value
    raise InvalidConfig(f"unknown oracle {oracle!r}")


def run_mutation_experiment(model, trace: Mapping[str, StateSnapshot], n_mutants: int, seed: int,
                            oracles: Sequence[str] = ORACLES, policy: Optional[OraclePolicy] = None,
                            baselines: Optional[Mapping[str, WholePageSAF]] = None,
                            regenerated_trace: Optional[Mapping[str, StateSnapshot]] = None) -> pd.DataFrame:
    """
    Judge n_mutants seeded mutants with every oracle; one row per (mutant, oracle).

    None-category mutants are the unmodified model state compared against
    regenerated_trace (same app, fresh data) when given, else the trace.

    Raises:
        MisalignedTrace: a model state has no trace snapshot
    """
    policy = policy or OraclePolicy()
    baselines = dict(DEFAULT_BASELINES if baselines is None else baselines)
    if model.memo is None and "fragment-mem" in oracles:
        raise InvalidConfig("fragment-mem needs a model crawled with fragment dedup")
    for name, source in (("trace", trace), ("regenerated trace", regenerated_trace or trace)):
        missing = [sid for sid in model.states if sid not in source]
        if missing:
            raise MisalignedTrace(f"{name} has no snapshot for state(s) {missing}")

    rng = DeterministicRNG(seed, "mutation")
    state_ids = list(model.states)
    counts = {"mutants": 0, "skipped": 0, "errors": 0}
    rows: List[dict] = []
    attempts = 0
    while counts["mutants"] < n_mutants and attempts < 10 * n_mutants:
        attempts += 1
        sid = rng.choice(state_ids)
        op = rng.choice(SAMPLED_OPERATORS)
        original = model.states[sid]
        mutant_seed = rng.randbelow(2 ** 31)
        if op == "None":
            expected = original
            mutation = Mutation("None", sid, None, None, None, False)
            observed = (regenerated_trace or trace)[sid]
        else:
            try:
                expected, mutation = mutate(original, op, mutant_seed)
            except NoEligibleNode as e:
                counts["skipped"] += 1
                logger.debug(f"[skipped] {e}")
                continue
            observed = trace[sid]

        mutant_id = counts["mutants"]
        for oracle in oracles:
            try:
                label, level = _judge(oracle, expected, observed, original, model, policy, baselines)
            except PageFragError as e:
                counts["errors"] += 1
                logger.error(f"[error] mutant {mutant_id} ({op} on {sid}) oracle {oracle}: {e}")
                continue
            rows.append({
                "mutant": mutant_id, "state": sid, "operator": op, "target": mutation.target,
                "before": mutation.before, "after": mutation.after,
                "visible": mutation.visible, "category": mutation.category,
                "oracle": oracle, "classification": label, "verdict": level,
                "detected": policy.fails(Verdict.parse(level)),
            })
        logger.debug(f"[mutant] {mutant_id}: {op} on {sid} target={mutation.target} visible={mutation.visible}")
        counts["mutants"] += 1
        # mutant rasters are not reused
        if expected is not original:
            expected.release_raster()

    logger.info(f"mutation summary: mutants={counts['mutants']}, skipped={counts['skipped']}, errors={counts['errors']}")
    columns = ["mutant", "state", "operator", "target", "before", "after", "visible", "category",
               "oracle", "classification", "verdict", "detected"]
    return pd.DataFrame(rows, columns=columns)


def summarize_scores(df: pd.DataFrame) -> pd.DataFrame:
    """
    Per oracle: effectiveness over visible mutants, robustness over
    equivalent ones, and the tolerated share of each equivalent category.
    """
    out = []
    for oracle, group in df.groupby("oracle", sort=False):
        visible = group[group["visible"]]
        equivalent = group[~group["visible"]]
        row = {
            "oracle": oracle,
            "visible": len(visible),
            "detected": int(visible["detected"].sum()),
            "effectiveness": float(visible["detected"].mean()) if len(visible) else float("nan"),
            "equivalent": len(equivalent),
            "tolerated": int((~equivalent["detected"]).sum()),
            "robustness": float((~equivalent["detected"]).mean()) if len(equivalent) else float("nan"),
        }
        for category in ("None", "Attribute", "Invisible"):
            part = equivalent[equivalent["category"] == category]
            row[f"{category}_count"] = len(part)
            row[f"{category}_failures"] = int(part["detected"].sum())
        out.append(row)
    return pd.DataFrame(out).set_index("oracle") if out else pd.DataFrame()
