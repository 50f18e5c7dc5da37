import pytest
from bs4 import BeautifulSoup

from pagefrag.report import build_report, emit_report
from pagefrag.testgen import OraclePolicy, Verdict, generate_tests, run_tests


@pytest.fixture(scope="module")
def dup_results(mini_model, dup_app):
    return run_tests(generate_tests(mini_model), dup_app, mini_model)


def parse(path):
    return BeautifulSoup(path.read_text(encoding="utf-8"), "html.parser")


class TestReport:
    def test_empty_run(self, tmp_path):
        soup = parse(emit_report([], tmp_path / "report.html"))
        assert soup.title.string == "Regression test report"
        assert len(soup.select("table.tests tr")) == 1
        cells = [td.string for td in soup.select("table.summary tr")[1].find_all("td")]
        assert cells[:2] == ["0", "0"]

    def test_failing_test_names_fragments(self, dup_results, tmp_path):
        soup = parse(emit_report(dup_results, tmp_path / "report.html"))
        section = soup.find("section", id="test_1")
        assert section.select("span.badge.warn3")
        items = section.select("ul.fragments li.fragment")
        assert items and all("observed list#F" in li.get_text() for li in items)
        assert all(img["src"].startswith("data:image/png;base64,") for img in section.select("li.fragment img"))

    def test_fluid_fragments_are_flagged(self, dup_results, tmp_path):
        soup = parse(emit_report(dup_results, tmp_path / "report.html"))
        text = soup.find("section", id="test_2").get_text()
        assert "s1#F1" in text and "(data-fluid)" in text

    def test_overview(self, dup_results):
        soup = build_report(dup_results, OraclePolicy(fail_at=Verdict.WARN3), title="addressbook")
        rows = soup.select("table.tests tr")[1:]
        assert [r.find_all("td")[1].string for r in rows] == ["failed", "passed"]
        assert soup.h1.string == "addressbook"

    def test_deterministic(self, dup_results, tmp_path):
        a = emit_report(dup_results, tmp_path / "a.html").read_bytes()
        b = emit_report(dup_results, tmp_path / "b.html").read_bytes()
        assert a == b
