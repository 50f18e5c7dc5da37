# cli.py
"""
Command-line entry point.

    python -m pagefrag fragment SNAPSHOT [--crops]
    python -m pagefrag classify SNAPSHOT SNAPSHOT
    python -m pagefrag crawl APP [--max-actions N] [--baseline structural --t-c 0 --t-n 0]
    python -m pagefrag gentest MODEL_DIR
    python -m pagefrag runtest MODEL_DIR [--tests tests.json] [--fail-at warn2]
    python -m pagefrag mutate MODEL_DIR [--mutants 400]
    python -m pagefrag eval PAIRS_CSV --snapshots DIR [--structural T_C T_N]
    python -m pagefrag tune PAIRS_CSV --snapshots DIR --kind structural

Exit codes: 0 success, 1 domain error (or failed tests with
--fail-on-test-failure), 2 usage error. Every run writes manifest.json into
its output directory.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from helpers.paths import get_app_path, get_run_outdir
from helpers.run_manifest import RunManifest
from pagefrag.comparison import classify, explain
from pagefrag.config import DEFAULT_SEED, DEFAULT_TAGS, LOG_FORMAT, LOG_LEVEL, CompareConfig, FragConfig
from pagefrag.crawler import CrawlConfig, crawl, load_model, model_duplicate_pairs, save_model
from pagefrag.errors import PageFragError
from pagefrag.harness import SAF_KINDS, WholePageSAF, load_app
from pagefrag.metrics import (evaluate_pairs, interval_maxima, load_ground_truth, load_labeled_pairs,
                              load_snapshots, model_precision_recall, tune_thresholds)
from pagefrag.mutation import DEFAULT_BASELINES, run_mutation_experiment, summarize_scores
from pagefrag.report import emit_report
from pagefrag.snapshot import load_snapshot
from pagefrag.testgen import (OraclePolicy, Verdict, build_trace, generate_tests, load_tests, render_script,
                              run_tests, save_tests, summarize_results)

logger = logging.getLogger(__name__)

FAIL_AT_CHOICES = ("warn1", "warn2", "warn3", "error")


# ============================================================================
# ARGUMENTS
# ============================================================================

def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=None, help="output directory (default: <output-root>/<subcommand>/<name>)")
    p.add_argument("--name", default=None, help="run name under the output root")


def _add_frag(p: argparse.ArgumentParser) -> None:
    d = FragConfig()
    p.add_argument("--min-nodes", type=int, default=d.min_nodes)
    p.add_argument("--min-area", type=int, default=d.min_area)
    p.add_argument("--min-separator-px", type=int, default=d.min_separator_px)


def _add_compare(p: argparse.ArgumentParser) -> None:
    d = CompareConfig()
    p.add_argument("--visual-epsilon", type=float, default=d.visual_epsilon)
    p.add_argument("--max-depth", type=int, default=d.max_depth)


def _frag_cfg(args) -> FragConfig:
    return FragConfig(min_nodes=args.min_nodes, min_area=args.min_area, min_separator_px=args.min_separator_px)


def _compare_cfg(args) -> CompareConfig:
    return CompareConfig(visual_epsilon=args.visual_epsilon, max_depth=args.max_depth)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pagefrag", description="Fragment-based web app state abstraction")
    parser.add_argument("--log-level", default=LOG_LEVEL, choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        type=str.upper)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("fragment", help="fragment one snapshot")
    p.add_argument("snapshot", type=Path)
    p.add_argument("--crops", action="store_true", help="write one PNG per useful fragment")
    _add_frag(p)
    _add_output(p)
    p.set_defaults(handler=cmd_fragment)

    p = sub.add_parser("classify", help="classify a snapshot pair")
    p.add_argument("first", type=Path)
    p.add_argument("second", type=Path)
    _add_frag(p)
    _add_compare(p)
    _add_output(p)
    p.set_defaults(handler=cmd_classify)

    p = sub.add_parser("crawl", help="infer a model of a simulated app")
    p.add_argument("app", help="app definition path or fixture name")
    p.add_argument("--c0", type=float, default=1.0)
    p.add_argument("--max-actions", type=int, default=None)
    p.add_argument("--max-states", type=int, default=None)
    p.add_argument("--max-duration", type=float, default=None)
    p.add_argument("--explore-skipped-duplicates", action="store_true")
    p.add_argument("--tags", default=",".join(DEFAULT_TAGS), help="comma-separated actionable selectors")
    p.add_argument("--baseline", choices=SAF_KINDS, default=None, help="crawl with a whole-page SAF instead")
    p.add_argument("--t-c", type=float, default=0.0)
    p.add_argument("--t-n", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None, help="data seed (default: the app's)")
    _add_frag(p)
    _add_compare(p)
    _add_output(p)
    p.set_defaults(handler=cmd_crawl)

    p = sub.add_parser("gentest", help="generate tests from a crawled model")
    p.add_argument("model", type=Path)
    _add_output(p)
    p.set_defaults(handler=cmd_gentest)

    p = sub.add_parser("runtest", help="run generated tests")
    p.add_argument("model", type=Path)
    p.add_argument("--tests", type=Path, default=None, help="test plan (default: generated from the model)")
    p.add_argument("--app", default=None, help="app to test (default: the model's app fixture)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--fail-at", choices=FAIL_AT_CHOICES, default="warn2")
    p.add_argument("--no-memo", action="store_true", help="never downgrade Warn2 to Warn1")
    p.add_argument("--fail-on-test-failure", action="store_true")
    p.add_argument("--format", choices=("json", "html"), default="html")
    _add_output(p)
    p.set_defaults(handler=cmd_runtest)

    p = sub.add_parser("mutate", help="score oracles on seeded DOM mutants")
    p.add_argument("model", type=Path)
    p.add_argument("--app", default=None)
    p.add_argument("--mutants", type=int, default=400)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--regenerate-seed", type=int, default=None, help="data seed of the None-category trace")
    p.add_argument("--fail-at", choices=FAIL_AT_CHOICES, default="warn2")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_output(p)
    p.set_defaults(handler=cmd_mutate)

    p = sub.add_parser("eval", help="score classifiers on labeled pairs, or a model against ground truth")
    p.add_argument("pairs", type=Path, nargs="?", default=None)
    p.add_argument("--snapshots", type=Path, default=None)
    p.add_argument("--structural", type=float, nargs=2, metavar=("T_C", "T_N"), default=None)
    p.add_argument("--visual", type=float, nargs=2, metavar=("T_C", "T_N"), default=None)
    p.add_argument("--model", type=Path, default=None)
    p.add_argument("--ground-truth", type=Path, default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_frag(p)
    _add_compare(p)
    _add_output(p)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("tune", help="search whole-page SAF thresholds")
    p.add_argument("pairs", type=Path)
    p.add_argument("--snapshots", type=Path, required=True)
    p.add_argument("--kind", choices=SAF_KINDS, required=True)
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--interval", type=int, default=10)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    _add_output(p)
    p.set_defaults(handler=cmd_tune)
    return parser


# ============================================================================
# HANDLERS
# ============================================================================

def _outdir(args) -> Path:
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        return args.out
    return get_run_outdir(args.subcommand, args.name)


def _write_json(manifest: RunManifest, path: Path, data) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")
    return manifest.add_output(path)


def _write_table(manifest: RunManifest, df, base: Path, fmt: str, index: bool = False) -> Path:
    if fmt == "json":
        path = base.with_suffix(".json")
        df.to_json(path, orient="table" if index else "records", indent=2)
    else:
        path = base.with_suffix(".csv")
        df.to_csv(path, index=index)
    return manifest.add_output(path)


def _app_for(args, model):
    return load_app(get_app_path(args.app or model.app_name))


def cmd_fragment(args, manifest: RunManifest) -> int:
    snap = load_snapshot(args.snapshot)
    cfg = _frag_cfg(args)
    manifest.add_config("frag", cfg.to_dict())
    root = snap.root_fragment(cfg)
    _write_json(manifest, manifest.outdir / "fragments.json", root.to_dict())
    if args.crops:
        for f in root.useful_fragments():
            manifest.add_output(f.crop.save_png(manifest.outdir / "crops" / f"{snap.state_id or 'page'}_F{f.frag_id}.png"))
    useful = root.useful_fragments()
    print(json.dumps({"state": snap.state_id, "fragments": sum(1 for _ in root.walk()), "useful": len(useful),
                      "labels": [f.label for f in useful]}, indent=2))
    return 0


def cmd_classify(args, manifest: RunManifest) -> int:
    frag_cfg, compare_cfg = _frag_cfg(args), _compare_cfg(args)
    manifest.add_config("frag", frag_cfg.to_dict())
    manifest.add_config("compare", compare_cfg.to_dict())
    a, b = load_snapshot(args.first), load_snapshot(args.second)
    result = explain(a.root_fragment(frag_cfg), b.root_fragment(frag_cfg), compare_cfg)
    label = classify(a.root_fragment(frag_cfg), b.root_fragment(frag_cfg), cfg=compare_cfg)
    _write_json(manifest, manifest.outdir / "classification.json",
                {"first": str(args.first), "second": str(args.second), **result})
    print(label.value)
    print(json.dumps(result["steps"], indent=2))
    return 0


def cmd_crawl(args, manifest: RunManifest) -> int:
    app = load_app(get_app_path(args.app))
    baseline = WholePageSAF(args.baseline, args.t_c, args.t_n) if args.baseline else None
    cfg = CrawlConfig(
        c0=args.c0, max_actions=args.max_actions, max_states=args.max_states, max_duration=args.max_duration,
        explore_skipped_duplicates=args.explore_skipped_duplicates,
        tag_set=tuple(t.strip() for t in args.tags.split(",") if t.strip()),
        frag=_frag_cfg(args), compare=_compare_cfg(args), baseline=baseline,
        seed=app.seed if args.seed is None else args.seed,
    )
    manifest.seed = cfg.seed
    manifest.add_config("crawl", cfg.to_dict())
    model = crawl(app, cfg)
    manifest.add_output(save_model(model, manifest.outdir))
    for path in sorted((manifest.outdir / "states").glob("*.json")):
        manifest.add_output(path)
    if model.memo is not None:
        manifest.add_output(manifest.outdir / "memo.json")
    _write_json(manifest, manifest.outdir / "audit.json", model.audit)
    summary = {"app": app.name, "states": len(model.states), "transitions": len(model.transitions),
               "paths": len(model.paths), "stoppedBy": model.stopped_by,
               "duplicatePairs": [list(p) for p in model_duplicate_pairs(model)]}
    print(json.dumps(summary, indent=2))
    return 0


def cmd_gentest(args, manifest: RunManifest) -> int:
    model = load_model(args.model)
    tests = generate_tests(model)
    manifest.add_output(save_tests(tests, manifest.outdir / "tests.json"))
    for t in tests:
        path = manifest.outdir / "scripts" / f"{t.id}.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(render_script(t), encoding="utf-8")
        manifest.add_output(path)
    print(json.dumps({"tests": len(tests), "steps": sum(len(t.steps) for t in tests)}, indent=2))
    return 0


def cmd_runtest(args, manifest: RunManifest) -> int:
    model = load_model(args.model)
    app = _app_for(args, model)
    tests = load_tests(args.tests) if args.tests else generate_tests(model)
    policy = OraclePolicy(fail_at=Verdict.parse(args.fail_at), use_memo=not args.no_memo)
    manifest.seed = app.seed if args.seed is None else args.seed
    manifest.add_config("policy", policy.to_dict())
    results = run_tests(tests, app, model, policy, seed=args.seed)
    summary = summarize_results(results, policy)
    _write_json(manifest, manifest.outdir / "results.json",
                {"summary": summary, "results": [r.to_dict() for r in results]})
    if args.format == "html":
        manifest.add_output(emit_report(results, manifest.outdir / "report.html", policy,
                                        title=f"Regression test report: {app.name}"))
    print(json.dumps(summary, indent=2))
    if args.fail_on_test_failure and summary["failed"]:
        logger.error(f"[error] {summary['failed']} of {summary['tests']} test(s) failed")
        return 1
    return 0


def cmd_mutate(args, manifest: RunManifest) -> int:
    model = load_model(args.model)
    app = _app_for(args, model)
    policy = OraclePolicy(fail_at=Verdict.parse(args.fail_at))
    trace_seed = model.cfg.seed if model.cfg.seed is not None else app.seed
    regen_seed = trace_seed + 1 if args.regenerate_seed is None else args.regenerate_seed
    manifest.seed = args.seed
    manifest.add_config("mutation", {"mutants": args.mutants, "trace_seed": trace_seed, "regenerate_seed": regen_seed,
                                     "policy": policy.to_dict(),
                                     "baselines": {k: v.to_dict() for k, v in DEFAULT_BASELINES.items()}})
    tests = generate_tests(model)
    trace = build_trace(model, app, tests, seed=trace_seed)
    regenerated = build_trace(model, app, tests, seed=regen_seed)
    df = run_mutation_experiment(model, trace, args.mutants, args.seed, policy=policy, regenerated_trace=regenerated)
    mutants_path = manifest.outdir / "mutants.parquet"
    df.to_parquet(mutants_path, index=False)
    manifest.add_output(mutants_path)
    scores = summarize_scores(df)
    _write_table(manifest, scores, manifest.outdir / "scores", args.format, index=True)
    print(scores.to_string())
    return 0


def cmd_eval(args, manifest: RunManifest) -> int:
    out = {}
    if args.model is not None:
        if args.ground_truth is None:
            raise SystemExit("eval --model needs --ground-truth")
        model = load_model(args.model)
        pr, re, f1 = model_precision_recall(model, load_ground_truth(args.ground_truth))
        out["model"] = {"precision": pr, "recall": re, "f1": f1, "states": len(model.states)}
    if args.pairs is not None:
        if args.snapshots is None:
            raise SystemExit("eval PAIRS needs --snapshots")
        safs = []
        if args.structural:
            safs.append(WholePageSAF("structural", *args.structural))
        if args.visual:
            safs.append(WholePageSAF("visual", *args.visual))
        frag_cfg, compare_cfg = _frag_cfg(args), _compare_cfg(args)
        manifest.add_config("frag", frag_cfg.to_dict())
        manifest.add_config("compare", compare_cfg.to_dict())
        table, scores = evaluate_pairs(load_labeled_pairs(args.pairs), load_snapshots(args.snapshots),
                                       safs, frag_cfg, compare_cfg)
        _write_table(manifest, table, manifest.outdir / "predictions", args.format)
        out["f1"] = scores
    if not out:
        raise SystemExit("eval needs PAIRS or --model")
    _write_json(manifest, manifest.outdir / "scores.json", out)
    print(json.dumps(out, indent=2))
    return 0


def cmd_tune(args, manifest: RunManifest) -> int:
    manifest.seed = args.seed
    manifest.add_config("tune", {"kind": args.kind, "budget": args.budget, "interval": args.interval})
    pairs = load_labeled_pairs(args.pairs)
    t_c, t_n, best, trace = tune_thresholds(args.kind, pairs, load_snapshots(args.snapshots), args.budget, args.seed)
    _write_table(manifest, trace, manifest.outdir / "trace", args.format)
    _write_table(manifest, interval_maxima(trace, args.interval), manifest.outdir / "intervals", args.format)
    out = {"kind": args.kind, "t_c": t_c, "t_n": t_n, "f1": best, "trials": len(trace)}
    _write_json(manifest, manifest.outdir / "best.json", out)
    print(json.dumps(out, indent=2))
    return 0


# ============================================================================
# MAIN
# ============================================================================

def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    logging.basicConfig(level=args.log_level, format=LOG_FORMAT)
    manifest = RunManifest(_outdir(args), args.subcommand, argv)
    try:
        code = args.handler(args, manifest)
        manifest.status = "ok" if code == 0 else "failed"
        return code
    except PageFragError as e:
        logger.error(f"[error] {type(e).__name__}: {e}")
        manifest.status, manifest.error = "error", f"{type(e).__name__}: {e}"
        return 1
    except SystemExit as e:
        # handler-level usage errors
        if isinstance(e.code, str):
            parser.print_usage(sys.stderr)
            print(f"pagefrag: error: {e.code}", file=sys.stderr)
            manifest.status, manifest.error = "usage", e.code
            return 2
        manifest.status = "ok" if not e.code else "failed"
        return e.code or 0
    finally:
        try:
            manifest.write()
        except OSError as e:
            logger.error(f"[error] cannot write manifest to {manifest.outdir}: {e}")
