import json

import pandas as pd
import pytest

from helpers.paths import ADDRESSBOOK_DIR
from pagefrag.cli import main

PAIRS = str(ADDRESSBOOK_DIR / "pairs.csv")


def snapshot_path(sid):
    return str(ADDRESSBOOK_DIR / f"{sid}.json")


@pytest.fixture(scope="module")
def model_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("crawl")
    assert main(["crawl", "addressbook-mini", "--max-actions", "50", "--out", str(out)]) == 0
    return out


class TestUsage:
    def test_no_arguments(self, capsys):
        assert main([]) == 2

    def test_unknown_subcommand(self, capsys):
        assert main(["explore"]) == 2

    def test_missing_snapshot(self, tmp_path):
        assert main(["classify", str(tmp_path / "nope.json"), snapshot_path("s1"), "--out", str(tmp_path)]) == 1
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["subcommand"] == "classify"
        assert manifest["status"] == "error"
        assert manifest["error"].startswith("ParseError")
        assert manifest["outputs"] == []

    def test_unknown_app_still_writes_manifest(self, tmp_path):
        assert main(["crawl", "no-such-app", "--out", str(tmp_path)]) == 1
        assert json.loads((tmp_path / "manifest.json").read_text())["status"] == "error"


class TestClassify:
    def test_prints_label_then_trace(self, tmp_path, capsys):
        assert main(["classify", snapshot_path("s3"), snapshot_path("s5"), "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "Nd3"
        saved = json.loads((tmp_path / "classification.json").read_text())
        assert saved["label"] == "Nd3"

    def test_fragment_crops(self, tmp_path, capsys):
        assert main(["fragment", snapshot_path("s3"), "--crops", "--out", str(tmp_path)]) == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed["useful"] == 6
        assert len(list((tmp_path / "crops").glob("*.png"))) == 6


class TestCrawl:
    def test_outputs(self, model_dir):
        assert (model_dir / "model.json").exists()
        assert (model_dir / "memo.json").exists()
        manifest = json.loads((model_dir / "manifest.json").read_text())
        assert manifest["subcommand"] == "crawl"
        assert manifest["seed"] == 7
        assert manifest["status"] == "ok" and manifest["error"] is None
        paths = {f["path"] for f in manifest["outputs"]}
        assert {"model.json", "memo.json", "audit.json"} <= paths
        assert all(len(f["sha256"]) == 64 for f in manifest["outputs"])


class TestTestRun:
    def test_gentest_then_runtest(self, model_dir, tmp_path, capsys):
        plan = tmp_path / "gen"
        assert main(["gentest", str(model_dir), "--out", str(plan)]) == 0
        assert (plan / "scripts" / "test_1.txt").exists()

        run = tmp_path / "run"
        code = main(["runtest", str(model_dir), "--tests", str(plan / "tests.json"),
                     "--fail-on-test-failure", "--out", str(run)])
        assert code == 0
        assert (run / "report.html").exists()
        results = json.loads((run / "results.json").read_text())
        assert results["summary"]["failed"] == 0

    def test_regression_fails_run(self, model_dir, tmp_path):
        code = main(["runtest", str(model_dir), "--app", "addressbook-mini-dup",
                     "--fail-on-test-failure", "--out", str(tmp_path)])
        assert code == 1
        assert json.loads((tmp_path / "manifest.json").read_text())["status"] == "failed"

    def test_failures_without_flag_exit_zero(self, model_dir, tmp_path):
        assert main(["runtest", str(model_dir), "--app", "addressbook-mini-dup", "--format", "json",
                     "--out", str(tmp_path)]) == 0
        assert not (tmp_path / "report.html").exists()


class TestExperiments:
    def test_mutate(self, model_dir, tmp_path, capsys):
        assert main(["mutate", str(model_dir), "--mutants", "20", "--out", str(tmp_path)]) == 0
        df = pd.read_parquet(tmp_path / "mutants.parquet")
        assert df["mutant"].nunique() == 20
        scores = pd.read_csv(tmp_path / "scores.csv", index_col=0)
        assert "fragment-mem" in scores.index

    def test_eval_pairs(self, tmp_path, capsys):
        code = main(["eval", PAIRS, "--snapshots", str(ADDRESSBOOK_DIR), "--structural", "0.01", "0.15",
                     "--out", str(tmp_path)])
        assert code == 0
        scores = json.loads((tmp_path / "scores.json").read_text())
        assert scores["f1"]["fragment"] == 1.0
        assert len(pd.read_csv(tmp_path / "predictions.csv")) == 10

    def test_eval_needs_input(self, tmp_path):
        assert main(["eval", "--out", str(tmp_path)]) == 2

    def test_tune(self, tmp_path, capsys):
        code = main(["tune", PAIRS, "--snapshots", str(ADDRESSBOOK_DIR), "--kind", "visual", "--budget", "25",
                     "--out", str(tmp_path)])
        assert code == 0
        best = json.loads((tmp_path / "best.json").read_text())
        assert best["t_c"] <= best["t_n"]
        assert len(pd.read_csv(tmp_path / "intervals.csv")) == -(-best["trials"] // 10)
