"""Shared fixtures: the addressbook snapshots, the simulated app and one crawl of it."""

import pytest

from helpers.paths import ADDRESSBOOK_DIR, APPS_DIR
from pagefrag.crawler import CrawlConfig, crawl
from pagefrag.harness import load_app
from pagefrag.snapshot import StateSnapshot, build_dom, load_snapshot

FIXTURE_STATES = ("s1", "s3", "s5", "s6")


@pytest.fixture(scope="session")
def addressbook():
    """Hand-written snapshots keyed by state id."""
    return {sid: load_snapshot(ADDRESSBOOK_DIR / f"{sid}.json") for sid in FIXTURE_STATES}


@pytest.fixture(scope="session")
def mini_app():
    return load_app(APPS_DIR / "addressbook-mini.json")


@pytest.fixture(scope="session")
def dup_app():
    return load_app(APPS_DIR / "addressbook-mini-dup.json")


@pytest.fixture(scope="session")
def v1_app():
    return load_app(APPS_DIR / "addressbook-mini-v1.json")


@pytest.fixture(scope="session")
def mini_model(mini_app):
    """Fragment-dedup crawl of addressbook-mini. Treat as read-only."""
    return crawl(mini_app, CrawlConfig(max_actions=50))


@pytest.fixture
def make_snapshot():
    """Factory building a snapshot from raw node records."""
    def _make(records, state_id="t", viewport=(200, 200)):
        return StateSnapshot(state_id=state_id, url=f"http://test.local/{state_id}",
                             dom=build_dom(records), viewport=viewport)
    return _make
