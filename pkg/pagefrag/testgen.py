# testgen.py
"""
Regression tests from exploration paths, and their execution with
fragment-based oracles.

Each path becomes one test: load the app, assert the path's first state, then
for every transition fire its actionable and assert its target state. An
assert classifies the browser page against the recorded state:

    Clone     -> Success
    Nd2       -> Warn2, or Warn1 when every visually changed fragment is data-fluid
    Nd3       -> Warn3
    Distinct  -> Error (execution stops)

A test fails when any verdict reaches OraclePolicy.fail_at.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import total_ordering
from pathlib import Path
from typing import Dict, List, Mapping, Optional

from pagefrag.comparison import ClassLabel, changed_fragments, classify, explain, localize_visual_changes
from pagefrag.config import CompareConfig, FragConfig
from pagefrag.errors import EmptyModel, InvalidConfig, MalformedTest, ParseError, StaleActionable, UnregisteredFragment
from pagefrag.fragmentation import Fragment
from pagefrag.harness import Gamma, Session, SimApp
from pagefrag.memo import FragmentMemo, is_data_fluid
from pagefrag.snapshot import StateSnapshot

logger = logging.getLogger(__name__)


@total_ordering
class Verdict(Enum):
    SUCCESS = "Success"
    WARN1 = "Warn1"
    WARN2 = "Warn2"
    WARN3 = "Warn3"
    ERROR = "Error"

    @property
    def severity(self) -> int:
        return _VERDICT_ORDER.index(self)

    def __lt__(self, other):
        if not isinstance(other, Verdict):
            return NotImplemented
        return self.severity < other.severity

    @classmethod
    def parse(cls, text: str) -> "Verdict":
        for v in cls:
            if v.value.lower() == text.strip().lower():
                return v
        raise InvalidConfig(f"unknown verdict level {text!r}")


_VERDICT_ORDER = [Verdict.SUCCESS, Verdict.WARN1, Verdict.WARN2, Verdict.WARN3, Verdict.ERROR]

LABEL_VERDICTS = {ClassLabel.CLONE: Verdict.SUCCESS, ClassLabel.ND3: Verdict.WARN3, ClassLabel.DISTINCT: Verdict.ERROR}
GAMMA_VERDICTS = {Gamma.CLONE: Verdict.SUCCESS, Gamma.ND: Verdict.WARN2, Gamma.DISTINCT: Verdict.ERROR}


@dataclass(frozen=True)
class OraclePolicy:
    fail_at: Verdict = Verdict.WARN2
    use_memo: bool = True

    def __post_init__(self):
        if self.fail_at == Verdict.SUCCESS:
            raise InvalidConfig("fail_at must be a warning level or Error")

    def fails(self, level: Verdict) -> bool:
        return level >= self.fail_at

    def to_dict(self) -> dict:
        return {"fail_at": self.fail_at.value, "use_memo": self.use_memo}


@dataclass(frozen=True)
class TestStep:
    __test__ = False
    kind: str  # load | action | assert
    state: Optional[str] = None
    locator: Optional[str] = None
    event: str = "click"
    label: str = ""
    transition: Optional[str] = None

    def to_dict(self) -> dict:
        return {k: v for k, v in {
            "kind": self.kind, "state": self.state, "locator": self.locator,
            "event": self.event if self.kind == "action" else None,
            "label": self.label or None, "transition": self.transition,
        }.items() if v is not None}


@dataclass
class TestCase:
    __test__ = False
    id: str
    base_url: str
    steps: List[TestStep] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"id": self.id, "baseUrl": self.base_url, "steps": [s.to_dict() for s in self.steps]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "TestCase":
        try:
            steps = [TestStep(**s) for s in data["steps"]]
            test = cls(id=str(data["id"]), base_url=str(data.get("baseUrl", "")), steps=steps)
        except (KeyError, TypeError) as e:
            raise MalformedTest(f"bad test record: {e}") from e
        validate_test(test)
        return test


@dataclass
class StepVerdict:
    index: int
    kind: str
    level: Verdict
    state: Optional[str] = None
    classification: Optional[str] = None
    detail: dict = field(default_factory=dict)
    fragments: List[Fragment] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"index": self.index, "kind": self.kind, "level": self.level.value,
                "state": self.state, "classification": self.classification, "detail": self.detail}


@dataclass
class TestResult:
    __test__ = False
    test_id: str
    verdicts: List[StepVerdict]
    failed: bool

    @property
    def worst(self) -> Verdict:
        return max((v.level for v in self.verdicts), default=Verdict.SUCCESS)

    def to_dict(self) -> dict:
        return {"test": self.test_id, "failed": self.failed, "worst": self.worst.value,
                "verdicts": [v.to_dict() for v in self.verdicts]}


# ============================================================================
# GENERATION
# ============================================================================

def validate_test(test: TestCase) -> None:
    """Step 0 loads, step 1 asserts, then action/assert pairs."""
    steps = test.steps
    if len(steps) < 2 or steps[0].kind != "load" or steps[1].kind != "assert":
        raise MalformedTest(f"{test.id}: a test starts with load then assert")
    rest = steps[2:]
    if len(rest) % 2:
        raise MalformedTest(f"{test.id}: dangling step at the end")
    for action, check in zip(rest[::2], rest[1::2]):
        if action.kind != "action" or not action.locator or check.kind != "assert" or not check.state:
            raise MalformedTest(f"{test.id}: expected action/assert pairs after the first assert")


def generate_tests(model) -> List[TestCase]:
    """
    One test per exploration path of a crawled AppModel.

    Raises:
        EmptyModel: the model has no states or no paths
    """
    if not model.states or not model.paths:
        raise EmptyModel(f"model of {model.app_name or 'app'} has no states or paths")
    tests = []
    for i, path in enumerate(model.paths, 1):
        steps = [TestStep(kind="load"), TestStep(kind="assert", state=path.start)]
        for tid in path.transitions:
            t = model.transition(tid)
            kind = next((a.kind for a in model.actionables.get(t.source, []) if a.locator == t.locator), "click")
            steps.append(TestStep(kind="action", locator=t.locator, event=kind, label=t.label, transition=tid))
            steps.append(TestStep(kind="assert", state=t.target))
        tests.append(TestCase(id=f"test_{i}", base_url=model.base_url, steps=steps))
    logger.info(f"generated {len(tests)} test(s) from {len(model.paths)} path(s)")
    return tests


def render_script(test: TestCase) -> str:
    """Readable form of a test plan, one call per line."""
    lines = [f"# {test.id}", f'get("{test.base_url}")']
    for step in test.steps[1:]:
        if step.kind == "assert":
            lines.append(f'assert_state("{step.state}")')
        else:
            comment = f"  # {step.label}" if step.label else ""
            lines.append(f'{step.event}("{step.locator}"){comment}')
    return "\n".join(lines) + "\n"


def save_tests(tests: List[TestCase], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"tests": [t.to_dict() for t in tests]}, indent=1), encoding="utf-8")
    return path


def load_tests(path: Path) -> List[TestCase]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"cannot read test plan {path}: {e}") from e
    return [TestCase.from_dict(t) for t in data.get("tests", [])]


# ============================================================================
# EXECUTION
# ============================================================================

def _fluid(memo: Optional[FragmentMemo], f: Fragment, fluid_root: Optional[Fragment]) -> bool:
    if memo is None:
        return False
    source = fluid_root.find(f.frag_id) if fluid_root is not None else f
    if source is None:
        return False
    try:
        return is_data_fluid(memo, source)
    except UnregisteredFragment:
        return False


def assert_state(expected: StateSnapshot, observed: StateSnapshot, memo: Optional[FragmentMemo],
                 frag_cfg: Optional[FragConfig] = None, compare_cfg: Optional[CompareConfig] = None,
                 fluid_root: Optional[Fragment] = None, with_trace: bool = False, index: int = 0) -> StepVerdict:
    """
    Oracle verdict for one assert. With memo=None no Warn1 downgrade happens.
    Fluid flags are read from fluid_root's fragment with the same id when
    given (for expected pages that are not model states themselves).
    """
    er = expected.root_fragment(frag_cfg)
    ob = observed.root_fragment(frag_cfg)
    label = classify(er, ob, memo, compare_cfg)
    detail: dict = {}
    fragments: List[Fragment] = []
    if label == ClassLabel.ND2:
        fragments = localize_visual_changes(er, observed.raster)
        flags = {f.label: _fluid(memo, f, fluid_root) for f in fragments}
        level = Verdict.WARN1 if fragments and all(flags.values()) else Verdict.WARN2
        detail["changedFragments"] = [{"side": "expected", "fragment": f.label, "bbox": list(f.bbox or ()),
                                       "fluid": flags[f.label]} for f in fragments]
    else:
        level = LABEL_VERDICTS[label]
        if label != ClassLabel.CLONE:
            tagged = changed_fragments(er, ob)
            fragments = [f for _, f in tagged]
            detail["changedFragments"] = [{"side": side, "fragment": f.label, "bbox": list(f.bbox or ())}
                                          for side, f in tagged]
    if with_trace:
        detail["trace"] = explain(er, ob, compare_cfg)["steps"]
    return StepVerdict(index=index, kind="assert", level=level, state=expected.state_id,
                       classification=label.value, detail=detail, fragments=fragments)


def execute_test(test: TestCase, app: SimApp, memo: Optional[FragmentMemo], policy: Optional[OraclePolicy] = None,
                 *, states: Mapping[str, StateSnapshot], seed: Optional[int] = None,
                 frag_cfg: Optional[FragConfig] = None, compare_cfg: Optional[CompareConfig] = None) -> TestResult:
    """
    Run one test on a freshly reset session. A failed action or a Distinct
    assert ends the test with Error.

    Raises:
        MalformedTest: the plan is malformed or asserts an unknown state
    """
    policy = policy or OraclePolicy()
    validate_test(test)
    oracle_memo = memo if policy.use_memo else None
    session = Session(app, seed=seed)
    verdicts: List[StepVerdict] = []
    for i, step in enumerate(test.steps):
        if step.kind == "load":
            session.load_url()
            verdicts.append(StepVerdict(index=i, kind="load", level=Verdict.SUCCESS))
        elif step.kind == "action":
            try:
                session.fire(step.locator)
            except StaleActionable as e:
                verdicts.append(StepVerdict(index=i, kind="action", level=Verdict.ERROR, detail={"error": str(e)}))
                logger.info(f"[verdict] {test.id} step {i}: action {step.label or step.locator} failed")
                break
            verdicts.append(StepVerdict(index=i, kind="action", level=Verdict.SUCCESS))
        else:
            if step.state not in states:
                raise MalformedTest(f"{test.id}: assert on unknown state {step.state!r}")
            v = assert_state(states[step.state], session.current, oracle_memo, frag_cfg, compare_cfg,
                             with_trace=True, index=i)
            verdicts.append(v)
            logger.debug(f"[verdict] {test.id} step {i}: {step.state} {v.classification} -> {v.level.value}")
            if v.level == Verdict.ERROR:
                break
    failed = any(policy.fails(v.level) for v in verdicts)
    return TestResult(test_id=test.id, verdicts=verdicts, failed=failed)


def run_tests(tests: List[TestCase], app: SimApp, model, policy: Optional[OraclePolicy] = None,
              seed: Optional[int] = None) -> List[TestResult]:
    """Run tests sequentially against app using a crawled model's states and memo."""
    policy = policy or OraclePolicy()
    results = []
    counts = {"passed": 0, "failed": 0}
    for test in tests:
        result = execute_test(test, app, model.memo, policy, states=model.states, seed=seed,
                              frag_cfg=model.cfg.frag, compare_cfg=model.cfg.compare)
        counts["failed" if result.failed else "passed"] += 1
        logger.info(f"[{'failed' if result.failed else 'passed'}] {test.id} worst={result.worst.value}")
        results.append(result)
    logger.info(f"test summary: passed={counts['passed']}, failed={counts['failed']}")
    return results


def summarize_results(results: List[TestResult], policy: Optional[OraclePolicy] = None) -> dict:
    """Action and oracle success rates plus per-level verdict counts."""
    policy = policy or OraclePolicy()
    actions = [v for r in results for v in r.verdicts if v.kind == "action"]
    asserts = [v for r in results for v in r.verdicts if v.kind == "assert"]
    levels = {v.value: 0 for v in Verdict}
    for v in asserts + [a for a in actions if a.level == Verdict.ERROR]:
        levels[v.level.value] += 1
    return {
        "tests": len(results),
        "failed": sum(1 for r in results if r.failed),
        "fail_at": policy.fail_at.value,
        "actions": len(actions),
        "action_success_pct": 100.0 * sum(1 for a in actions if a.level == Verdict.SUCCESS) / len(actions) if actions else 100.0,
        "asserts": len(asserts),
        "oracle_success_pct": 100.0 * sum(1 for a in asserts if not policy.fails(a.level)) / len(asserts) if asserts else 100.0,
        "verdicts": levels,
    }


def build_trace(model, app: SimApp, tests: Optional[List[TestCase]] = None,
                seed: Optional[int] = None) -> Dict[str, StateSnapshot]:
    """
    Browser snapshots observed at each model state's first assert while
    replaying the tests; a seed override regenerates app data.
    """
    tests = tests if tests is not None else generate_tests(model)
    trace: Dict[str, StateSnapshot] = {}
    for test in tests:
        session = Session(app, seed=seed)
        for step in test.steps:
            if step.kind == "load":
                session.load_url()
            elif step.kind == "action":
                try:
                    session.fire(step.locator)
                except StaleActionable as e:
                    logger.error(f"[error] trace replay of {test.id} stopped ({e})")
                    break
            elif step.state not in trace:
                trace[step.state] = session.current
    return trace
