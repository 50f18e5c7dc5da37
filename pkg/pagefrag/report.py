# report.py
"""Static, self-contained HTML report of a regression run."""

import base64
import logging
from pathlib import Path
from typing import List, Optional

from bs4 import BeautifulSoup

from pagefrag.testgen import OraclePolicy, StepVerdict, TestResult, summarize_results

logger = logging.getLogger(__name__)

REPORT_CSS = """
body { font-family: sans-serif; margin: 24px; }
table { border-collapse: collapse; margin-bottom: 16px; }
th, td { border: 1px solid #ccc; padding: 4px 8px; text-align: left; }
.badge { padding: 2px 6px; border-radius: 4px; color: #fff; }
.badge.success { background: #2e7d32; }
.badge.warn1 { background: #9e9d24; }
.badge.warn2 { background: #ef6c00; }
.badge.warn3 { background: #d84315; }
.badge.error { background: #b71c1c; }
.fragment img { border: 1px solid #999; max-width: 480px; }
"""

# crops larger than this are listed without a thumbnail
MAX_CROP_PIXELS = 600 * 600


def _badge(soup: BeautifulSoup, level: str):
    span = soup.new_tag("span", attrs={"class": f"badge {level.lower()}"})
    span.string = level
    return span


def _row(soup: BeautifulSoup, cells, header: bool = False):
    tr = soup.new_tag("tr")
    for cell in cells:
        td = soup.new_tag("th" if header else "td")
        if isinstance(cell, str):
            td.string = cell
        else:
            td.append(cell)
        tr.append(td)
    return tr


def _fragment_listing(soup: BeautifulSoup, verdict: StepVerdict):
    ul = soup.new_tag("ul", attrs={"class": "fragments"})
    entries = verdict.detail.get("changedFragments", [])
    for entry, frag in zip(entries, verdict.fragments):
        li = soup.new_tag("li", attrs={"class": "fragment"})
        text = f"{entry['side']} {entry['fragment']} bbox={entry['bbox']}"
        if "fluid" in entry:
            text += " (data-fluid)" if entry["fluid"] else ""
        li.append(text)
        crop = frag.crop
        if not crop.empty and crop.width * crop.height <= MAX_CROP_PIXELS:
            data = base64.b64encode(crop.png_bytes()).decode("ascii")
            li.append(soup.new_tag("br"))
            li.append(soup.new_tag("img", attrs={"alt": entry["fragment"], "src": f"data:image/png;base64,{data}"}))
        ul.append(li)
    return ul


def build_report(results: List[TestResult], policy: Optional[OraclePolicy] = None,
                 title: str = "Regression test report") -> BeautifulSoup:
    soup = BeautifulSoup("<!DOCTYPE html><html><head></head><body></body></html>", "html.parser")
    head, body = soup.head, soup.body
    head.append(soup.new_tag("meta", attrs={"charset": "utf-8"}))
    title_tag = soup.new_tag("title")
    title_tag.string = title
    head.append(title_tag)
    style = soup.new_tag("style")
    style.string = REPORT_CSS
    head.append(style)

    h1 = soup.new_tag("h1")
    h1.string = title
    body.append(h1)

    summary = summarize_results(results, policy)
    table = soup.new_tag("table", attrs={"class": "summary"})
    table.append(_row(soup, ["tests", "failed", "fail at", "action success %", "oracle success %"], header=True))
    table.append(_row(soup, [str(summary["tests"]), str(summary["failed"]), summary["fail_at"],
                             f"{summary['action_success_pct']:.1f}", f"{summary['oracle_success_pct']:.1f}"]))
    body.append(table)

    overview = soup.new_tag("table", attrs={"class": "tests"})
    overview.append(_row(soup, ["test", "result", "worst verdict"], header=True))
    for r in results:
        overview.append(_row(soup, [r.test_id, "failed" if r.failed else "passed", _badge(soup, r.worst.value)]))
    body.append(overview)

    for r in results:
        section = soup.new_tag("section", attrs={"class": "test", "id": r.test_id})
        h2 = soup.new_tag("h2")
        h2.string = r.test_id
        section.append(h2)
        steps = soup.new_tag("table", attrs={"class": "verdicts"})
        steps.append(_row(soup, ["step", "kind", "state", "classification", "verdict"], header=True))
        for v in r.verdicts:
            steps.append(_row(soup, [str(v.index), v.kind, v.state or "", v.classification or "",
                                     _badge(soup, v.level.value)]))
        section.append(steps)
        for v in r.verdicts:
            if v.detail.get("changedFragments"):
                h3 = soup.new_tag("h3")
                h3.string = f"step {v.index}: changed fragments of {v.state}"
                section.append(h3)
                section.append(_fragment_listing(soup, v))
            elif v.detail.get("error"):
                p = soup.new_tag("p", attrs={"class": "error"})
                p.string = v.detail["error"]
                section.append(p)
        body.append(section)
    return soup


def emit_report(results: List[TestResult], path: Path, policy: Optional[OraclePolicy] = None,
                title: str = "Regression test report") -> Path:
    """Write the report; identical results give a byte-identical file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(str(build_report(results, policy, title)), encoding="utf-8")
    logger.info(f"report written to {path} ({len(results)} test(s))")
    return path
