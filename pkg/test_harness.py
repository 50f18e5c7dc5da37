import json

import pytest

from pagefrag.comparison import page_shape
from pagefrag.errors import InvalidConfig, ParseError, StaleActionable
from pagefrag.harness import (Gamma, Session, WholePageSAF, app_from_dict, gamma_classify, gamma_of, load_app,
                              page_distance, structural_distance, visual_distance)
from pagefrag.mutation import DEFAULT_BASELINES
from pagefrag.raster import tag_color
from pagefrag.snapshot import extract_actionables

LIST = "/html[1]/body[1]/div[2]/a[1]"
NEW = "/html[1]/body[1]/div[2]/a[2]"
REFRESH = "/html[1]/body[1]/div[3]/button[1]"
SUBMIT = "/html[1]/body[1]/div[3]/form[1]/input[4]"


class TestRendering:
    """The simulated addressbook renders the hand-written fixtures."""

    def test_home_matches_fixture(self, mini_app, addressbook):
        home = Session(mini_app).load_url()
        assert home.dom.to_records() == addressbook["s1"].dom.to_records()
        assert home.url == "http://addressbook.local/index.php"

    def test_list_has_fixture_shape(self, mini_app, addressbook):
        sess = Session(mini_app)
        sess.load_url()
        assert page_shape(sess.fire(LIST)) == page_shape(addressbook["s3"])

    def test_hidden_modal_is_not_painted(self, mini_app):
        home = Session(mini_app).load_url()
        assert tuple(home.raster.pixels[390, 650]) == tag_color("body")

    def test_actionables(self, mini_app):
        acts = extract_actionables(Session(mini_app).load_url())
        assert [(a.label, a.locator) for a in acts] == [("List", LIST), ("New", NEW), ("Refresh", REFRESH)]


class TestSession:
    def test_same_seed_same_data(self, mini_app):
        a, b = Session(mini_app, seed=3), Session(mini_app, seed=3)
        assert a.data == b.data

    def test_seed_changes_rows_not_fixed_values(self, mini_app):
        a, b = Session(mini_app, seed=1), Session(mini_app, seed=2)
        assert a.data["tip"] == b.data["tip"]
        assert a.data["entries"] != b.data["entries"]

    def test_add_row(self, mini_app):
        sess = Session(mini_app)
        sess.load_url()
        sess.fire(NEW)
        submit = next(a for a in extract_actionables(sess.current) if a.kind == "submit")
        after = sess.fire(submit)
        assert sess.page == "list"
        assert len(sess.data["entries"]) == 2
        assert sum(1 for n in after.dom.nodes.values() if n.attributes.get("class") == "entry") == 2

    def test_duplicate_row_variant(self, dup_app):
        sess = Session(dup_app)
        sess.load_url()
        sess.fire(NEW)
        sess.fire(next(a for a in extract_actionables(sess.current) if a.kind == "submit"))
        rows = sess.data["entries"]
        assert len(rows) == 3 and rows[1] == rows[2]

    def test_refresh_changes_tip(self, mini_app):
        sess = Session(mini_app)
        before = sess.load_url()
        after = sess.fire(REFRESH)
        assert sess.page == "home"
        assert before.dom.nodes[4].text != after.dom.nodes[4].text

    def test_reload_keeps_data(self, mini_app):
        sess = Session(mini_app)
        sess.load_url()
        sess.fire(REFRESH)
        tip = sess.data["tip"]
        sess.load_url()
        assert sess.data["tip"] == tip
        sess.reset()
        assert sess.data["tip"] != tip

    def test_refresh_depends_on_shown_tip_only(self, mini_app):
        sess = Session(mini_app)
        sess.load_url()
        seen = {}
        for _ in range(30):
            tip = sess.data["tip"]
            sess.fire(REFRESH)
            assert seen.setdefault(tip, sess.data["tip"]) == sess.data["tip"]
        assert len(seen) > 1

    def test_replay_after_reset_is_identical(self, mini_app):
        def run(sess):
            shots = [sess.load_url()]
            for locator in (REFRESH, LIST, NEW, SUBMIT, NEW, SUBMIT, LIST):
                shots.append(sess.fire(locator))
            return [(json.dumps(s.to_dict(), sort_keys=True), s.raster.digest()) for s in shots]

        sess = Session(mini_app)
        first = run(sess)
        sess.reset()
        assert run(sess) == first
        assert run(Session(mini_app)) == first
        assert run(Session(mini_app, seed=mini_app.seed + 1)) != first

    def test_stale_locator(self, mini_app):
        sess = Session(mini_app)
        with pytest.raises(StaleActionable):
            sess.fire(LIST)
        sess.load_url()
        with pytest.raises(StaleActionable):
            sess.fire("/html[1]/body[1]/div[9]")

    def test_unbound_actionable_is_noop(self, mini_app):
        sess = Session(mini_app)
        home = sess.load_url()
        assert sess.fire("/html[1]/body[1]/div[1]/h1[1]").dom.to_records() == home.dom.to_records()
        assert sess.history[-1] == ("fire", "/html[1]/body[1]/div[1]/h1[1]")


class TestAppDefinitions:
    def test_removed_link(self, v1_app):
        acts = extract_actionables(Session(v1_app).load_url())
        assert [a.label for a in acts] == ["New", "Refresh"]

    def test_missing_key(self):
        with pytest.raises(ParseError):
            app_from_dict({"name": "x"})

    def test_unknown_start(self):
        with pytest.raises(InvalidConfig):
            app_from_dict({"name": "x", "baseUrl": "u", "start": "nope", "layout": {}, "pages": {}})

    def test_dangling_xpath(self, tmp_path):
        data = {"name": "x", "baseUrl": "http://x/", "start": "p",
                "layout": {"tag": "html", "bbox": [0, 0, 100, 100], "children": [{"slot": True}]},
                "pages": {"p": {"content": [{"tag": "a", "text": "go", "bbox": [0, 0, 20, 20]}]}},
                "transitions": [{"from": "p", "xpath": "//button", "effects": [{"op": "noop"}]}]}
        path = tmp_path / "x.json"
        path.write_text(json.dumps(data))
        with pytest.raises(InvalidConfig):
            load_app(path)

    def test_extends_cycle(self, tmp_path):
        (tmp_path / "a.json").write_text(json.dumps({"extends": "a.json"}))
        with pytest.raises(ParseError):
            load_app(tmp_path / "a.json")


class TestWholePageSAF:
    def test_structural_distances(self, addressbook):
        assert structural_distance(addressbook["s3"], addressbook["s6"]) == 0.0
        assert structural_distance(addressbook["s1"], addressbook["s3"]) == pytest.approx(6 / 25)
        assert structural_distance(addressbook["s3"], addressbook["s5"]) == pytest.approx(10 / 35)

    def test_bound_returns_a_lower_bound(self, addressbook):
        exact = structural_distance(addressbook["s3"], addressbook["s5"])
        bounded = structural_distance(addressbook["s3"], addressbook["s5"], bound=0.01)
        assert 0.01 < bounded <= exact

    def test_visual_distances(self, addressbook):
        assert visual_distance(addressbook["s3"], addressbook["s3"]) == 0.0
        assert visual_distance(addressbook["s3"], addressbook["s6"]) < visual_distance(addressbook["s3"], addressbook["s5"])

    def test_gamma(self):
        saf = WholePageSAF("structural", 0.1, 0.3)
        assert gamma_of(saf, 0.05) == Gamma.CLONE
        assert gamma_of(saf, 0.1) == Gamma.ND
        assert gamma_of(saf, 0.3) == Gamma.ND
        assert gamma_of(saf, 0.31) == Gamma.DISTINCT

    def test_gamma_classify(self, addressbook):
        saf = WholePageSAF("structural", 0.01, 0.15)
        assert gamma_classify(saf, addressbook["s3"], addressbook["s6"]) == Gamma.CLONE
        assert gamma_classify(saf, addressbook["s1"], addressbook["s3"]) == Gamma.DISTINCT

    def test_invalid_saf(self, addressbook):
        with pytest.raises(InvalidConfig):
            WholePageSAF("pixels", 0, 1)
        with pytest.raises(InvalidConfig):
            WholePageSAF("visual", 0.5, 0.1)
        with pytest.raises(InvalidConfig):
            page_distance("pixels", addressbook["s1"], addressbook["s1"])

    @pytest.mark.parametrize("kind", ["structural", "visual"])
    def test_gamma_monotone_in_thresholds(self, addressbook, kind):
        rank = {Gamma.CLONE: 0, Gamma.ND: 1, Gamma.DISTINCT: 2}
        cuts = [0.0, 0.001, 0.01, 0.05, 0.1, 0.15, 0.3, 0.5, 1.0]
        for a in addressbook.values():
            for b in addressbook.values():
                for i, t_c in enumerate(cuts):
                    ranks = [rank[gamma_classify(WholePageSAF(kind, t_c, t_n), a, b)] for t_n in cuts[i:]]
                    assert ranks == sorted(ranks, reverse=True)
                    if i:
                        looser = gamma_classify(WholePageSAF(kind, t_c, t_c), a, b)
                        tighter = gamma_classify(WholePageSAF(kind, cuts[i - 1], t_c), a, b)
                        assert rank[looser] <= rank[tighter]

    def test_list_and_form_are_visually_distinct(self, mini_app):
        sess = Session(mini_app)
        sess.load_url()
        listing = sess.fire(LIST)
        form = sess.fire(NEW)
        assert visual_distance(listing, form) > 0.05
        assert gamma_classify(DEFAULT_BASELINES["visual"], listing, form) == Gamma.DISTINCT
