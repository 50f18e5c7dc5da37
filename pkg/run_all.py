import argparse
import subprocess
import sys
from pathlib import Path

from helpers.paths import ADDRESSBOOK_DIR, OUTPUT_ROOT

parser = argparse.ArgumentParser(description="End-to-end pagefrag pipeline on the bundled fixtures")
parser.add_argument("--out", type=Path, default=OUTPUT_ROOT / "pipeline")
parser.add_argument("--quick", action="store_true", help="small mutation and tuning budgets")
parser.add_argument("--app", default="addressbook-mini")
args = parser.parse_args()

out = args.out.resolve()
mutants = "40" if args.quick else "400"
budget = "30" if args.quick else "200"
pairs = str(ADDRESSBOOK_DIR / "pairs.csv")

print("=" * 60)
print(f"pagefrag pipeline: {args.app} -> {out}")
print("=" * 60)

steps = [
    ("Crawling the app", ["crawl", args.app, "--out", str(out / "crawl")]),
    ("Generating tests", ["gentest", str(out / "crawl"), "--out", str(out / "gentest")]),
    ("Running tests", ["runtest", str(out / "crawl"), "--tests", str(out / "gentest" / "tests.json"),
                       "--fail-on-test-failure", "--out", str(out / "runtest")]),
    ("Scoring oracles on mutants", ["mutate", str(out / "crawl"), "--mutants", mutants, "--out", str(out / "mutate")]),
    ("Evaluating classifiers on labeled pairs", ["eval", pairs, "--snapshots", str(ADDRESSBOOK_DIR),
                                                 "--out", str(out / "eval")]),
    ("Tuning structural thresholds", ["tune", pairs, "--snapshots", str(ADDRESSBOOK_DIR), "--kind", "structural",
                                      "--budget", budget, "--out", str(out / "tune-structural")]),
    ("Tuning visual thresholds", ["tune", pairs, "--snapshots", str(ADDRESSBOOK_DIR), "--kind", "visual",
                                  "--budget", budget, "--out", str(out / "tune-visual")]),
]

for i, (name, argv) in enumerate(steps, 1):
    print(f"\n[{i}/{len(steps)}] {name}...")
    try:
        subprocess.check_call([sys.executable, "-m", "pagefrag", *argv])
    except subprocess.CalledProcessError as e:
        print(f"❌ {argv[0]} failed: {e}", file=sys.stderr)
        sys.exit(1)

print("\n" + "=" * 60)
print("✅ Pipeline complete!")
print("=" * 60)
print("\nOutputs:")
for _, argv in steps:
    print(f"  ✅ {argv[-1]}")
print("=" * 60)
