import pytest

from pagefrag.comparison import NEAR_CLONE, classify
from pagefrag.crawler import (AppModel, CrawlConfig, crawl, load_model, model_duplicate_pairs, save_model,
                              score_actionable, score_state)
from pagefrag.errors import InvalidConfig, ParseError
from pagefrag.harness import Session, WholePageSAF
from pagefrag.memo import is_data_fluid


class TestCrawlConfig:
    @pytest.mark.parametrize("kwargs", [{"c0": 0}, {"c0": 1.5}, {"max_actions": 0}, {"tag_set": ()}])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidConfig):
            CrawlConfig(**kwargs)

    def test_dict_round_trip(self):
        cfg = CrawlConfig(c0=0.5, max_actions=9, baseline=WholePageSAF("visual", 0.001, 0.05), seed=4)
        assert CrawlConfig.from_dict(cfg.to_dict()) == cfg


class TestFragmentCrawl:
    """Fragment-deduplicating crawl of addressbook-mini."""

    def test_states_and_transitions(self, mini_model):
        assert list(mini_model.states) == ["s1", "s2", "s3", "s4"]
        assert [t.label for t in mini_model.transitions] == ["List", "New", "add", "Refresh"]
        assert [t.relation for t in mini_model.transitions] == ["new", "new", "new", "Nd2"]
        assert mini_model.stopped_by == "exhausted"

    def test_paths(self, mini_model):
        assert [p.transitions for p in mini_model.paths] == [["t1", "t2", "t3"], ["t4"]]
        assert [p.start for p in mini_model.paths] == ["s1", "s1"]

    def test_refresh_loops_back(self, mini_model):
        t4 = mini_model.transition("t4")
        assert (t4.source, t4.target) == ("s1", "s1")

    def test_final_scores(self, mini_model):
        scores = {sid: score_state(sid, mini_model) for sid in mini_model.states}
        assert scores == {"s1": -2, "s2": -1, "s3": -1, "s4": 0}

    def test_no_near_duplicate_states(self, mini_model):
        pairs = model_duplicate_pairs(mini_model)
        assert all(label not in ("Clone", "Nd2") for _, _, label in pairs)
        assert ("s2", "s4", "Nd3") in pairs

    def test_explored_class_is_deprioritized(self, mini_model):
        explores = [e for e in mini_model.audit if e["kind"] == "explore"]
        assert len(explores) == 4
        for e in explores:
            assert e["classScores"][f"{e['source']} {e['locator']}"] == -1
            assert all(score <= 0 for score in e["classScores"].values())

    def test_equivalent_links_share_a_class(self, mini_model):
        home_list = mini_model.actionables["s1"][0]
        assert mini_model.equivalence_class("s1", home_list) == [
            ("s1", home_list.locator), ("s2", home_list.locator),
            ("s3", home_list.locator), ("s4", home_list.locator),
        ]

    def test_unexplored_class_score(self, mini_model):
        fresh = AppModel("fresh", mini_model.base_url, CrawlConfig(c0=0.5))
        for snap in mini_model.states.values():
            fresh.add_state(snap)
        assert score_actionable(fresh.actionables["s1"][0], "s1", fresh) == pytest.approx(0.5 * 4)

    def test_fluid_fragments(self, mini_model):
        memo = mini_model.memo
        assert is_data_fluid(memo, mini_model.states["s1"].root_fragment().find(1))
        assert ("s2", 7) in memo.data_fluid
        assert not is_data_fluid(memo, mini_model.states["s1"].root_fragment().find(4))

    def test_routes(self, mini_model):
        assert mini_model.shortest_route("s1", "s4") == ["t1", "t2", "t3"]
        assert mini_model.shortest_route("s4", "s1") is None
        assert mini_model.shortest_route("s2", "s2") == []

    def test_deterministic(self, mini_app, mini_model):
        again = crawl(mini_app, CrawlConfig(max_actions=50))
        assert again.to_dict() == mini_model.to_dict()


class TestStoppingCriteria:
    def test_max_states(self, mini_app):
        model = crawl(mini_app, CrawlConfig(max_states=2))
        assert len(model.states) == 2
        assert model.stopped_by == "max_states"

    def test_max_actions(self, mini_app):
        model = crawl(mini_app, CrawlConfig(max_actions=2))
        assert len(model.transitions) == 2
        assert model.stopped_by == "max_actions"

    def test_explore_skipped_duplicates(self, mini_app):
        model = crawl(mini_app, CrawlConfig(max_actions=50, explore_skipped_duplicates=True))
        assert len(model.transitions) > 4


class TestBaselineCrawl:
    @pytest.mark.parametrize("kind,t_c,t_n", [
        ("structural", 0.0, 0.0),
        ("visual", 0.0, 0.0),
        ("structural", 0.01, 0.15),
    ])
    def test_never_converges(self, mini_app, kind, t_c, t_n):
        model = crawl(mini_app, CrawlConfig(max_actions=200, baseline=WholePageSAF(kind, t_c, t_n)))
        assert model.stopped_by == "max_actions"
        assert model.memo is None
        assert len(model.states) > 4
        assert not model.unreachable

    def test_nd_pages_become_states(self, mini_app):
        model = crawl(mini_app, CrawlConfig(max_actions=200, baseline=WholePageSAF("structural", 0.01, 0.15)))
        row_counts = {len(s.dom.xpath_nodes("//tr[@class='entry']"))
                      for s in model.states.values() if s.url.endswith("list.php")}
        assert len(row_counts) >= 3
        assert all(t.relation in ("new", "Clone") for t in model.transitions)

    def test_equivalence_is_per_actionable(self, mini_app):
        model = crawl(mini_app, CrawlConfig(max_actions=5, baseline=WholePageSAF("structural", 0.01, 0.15)))
        a = model.actionables["s1"][0]
        assert model.equivalence_class("s1", a) == [("s1", a.locator)]


class TestPathReplay:
    """Every recorded path, replayed on a freshly reset app, reaches its recorded targets."""

    def test_fragment_paths(self, mini_app, mini_model):
        for path in mini_model.paths:
            session = Session(mini_app)
            session.load_url()
            for tid in path.transitions:
                t = mini_model.transition(tid)
                snap = session.fire(t.locator)
                target = mini_model.states[t.target]
                assert classify(snap.root_fragment(), target.root_fragment(), mini_model.memo) in NEAR_CLONE

    def test_baseline_paths(self, mini_app):
        model = crawl(mini_app, CrawlConfig(max_actions=80, baseline=WholePageSAF("structural", 0.0, 0.0)))
        assert len(model.paths) > 1
        for path in model.paths:
            session = Session(mini_app)
            assert session.load_url().uid == model.states[path.start].uid
            for tid in path.transitions:
                t = model.transition(tid)
                assert session.fire(t.locator).uid == model.states[t.target].uid


class TestPersistence:
    def test_round_trip(self, mini_model, tmp_path):
        path = save_model(mini_model, tmp_path / "model")
        assert path.name == "model.json"
        assert (tmp_path / "model" / "states" / "s4.json").exists()
        again = load_model(tmp_path / "model")
        assert again.to_dict() == mini_model.to_dict()
        assert again.memo.to_dict() == mini_model.memo.to_dict()

    def test_missing_model(self, tmp_path):
        with pytest.raises(ParseError):
            load_model(tmp_path)
