import pytest

from pagefrag.comparison import ClassLabel
from pagefrag.errors import ParseError, UnregisteredFragment
from pagefrag.memo import FragmentMemo, format_key, is_data_fluid, observe_state, parse_key, register_state


@pytest.fixture
def memo(addressbook):
    m = FragmentMemo()
    register_state(m, addressbook["s3"])
    return m


class TestKeys:
    def test_format_and_parse(self):
        assert format_key(("s3", 7)) == "s3#7"
        assert parse_key("s3#7") == ("s3", 7)
        assert parse_key("a#b#2") == ("a#b", 2)

    @pytest.mark.parametrize("text", ["s3", "s3#", "s3#x"])
    def test_bad_key(self, text):
        with pytest.raises(ParseError):
            parse_key(text)


class TestRegistration:
    """Registering the list page and a near-duplicate of it."""

    def test_first_state_is_all_uniques(self, memo, addressbook):
        assert len(memo.uniques) == 6
        assert memo.duplicate_count == 0
        assert not memo.data_fluid
        assert len(memo) == len(addressbook["s3"].root_fragment().useful_fragments())

    def test_data_change_marks_fluid(self, memo, addressbook):
        report = register_state(memo, addressbook["s6"])
        assert report.new_uniques == []
        assert sorted(report.newly_fluid) == [("s3", 0), ("s3", 5), ("s3", 7)]
        dups = dict((k, label) for k, _, label in report.new_duplicates)
        assert dups[("s6", 1)] == "Clone"
        assert dups[("s6", 7)] == "Nd2"

    def test_every_fragment_registered_once(self, memo, addressbook):
        register_state(memo, addressbook["s6"])
        register_state(memo, addressbook["s5"])
        for sid in ("s3", "s5", "s6"):
            for f in addressbook[sid].root_fragment().useful_fragments():
                assert f in memo
        assert len(memo) == len(memo.uniques) + memo.duplicate_count

    def test_clone_inherits_fluidity(self, memo, addressbook):
        register_state(memo, addressbook["s6"])
        row = addressbook["s6"].root_fragment().find(7)
        header = addressbook["s6"].root_fragment().find(1)
        assert memo.representative(row) == ("s3", 7)
        assert is_data_fluid(memo, row)
        assert not is_data_fluid(memo, header)

    def test_reregistration_records_clones(self, memo, addressbook):
        before = memo.duplicate_count
        report = register_state(memo, addressbook["s3"])
        assert report.new_uniques == []
        assert len(report.new_duplicates) == 6
        assert all(label == "Clone" for _, _, label in report.new_duplicates)
        assert memo.duplicate_count == before + 6
        assert len(memo.uniques) + memo.duplicate_count == 2 * 6
        assert not memo.data_fluid

    def test_unregistered(self, memo, addressbook):
        with pytest.raises(UnregisteredFragment):
            memo.representative(addressbook["s1"].root_fragment())

    def test_results_are_cached(self, memo, addressbook):
        register_state(memo, addressbook["s6"])
        assert ClassLabel.ND2 in memo.results.values()


class TestObserve:
    def test_observed_state_is_not_registered(self, memo, addressbook):
        newly = observe_state(memo, addressbook["s6"])
        assert ("s3", 7) in newly
        assert addressbook["s6"].root_fragment() not in memo
        assert len(memo) == 6

    def test_fluidity_comes_with_a_relation(self, memo, addressbook):
        observe_state(memo, addressbook["s6"])
        observe_state(memo, addressbook["s6"])
        assert memo.observed[("s3", 7)] == [f"{addressbook['s6'].uid[:16]}#7"]
        for u in memo.uniques:
            assert (u.key in memo.data_fluid) == (memo.nd2_relations(u.key) > 0)

    def test_observed_relations_survive_round_trip(self, memo, addressbook):
        observe_state(memo, addressbook["s6"])
        again = FragmentMemo.from_dict(memo.to_dict(), addressbook)
        assert again.observed == memo.observed
        assert again.nd2_relations(("s3", 7)) == 1


class TestCrawlFluidity:
    """Fluid flags of the addressbook-mini crawl agree with the recorded Nd2 relations."""

    def test_fluid_iff_nd2_relation(self, mini_model):
        memo = mini_model.memo
        assert memo.data_fluid
        for u in memo.uniques:
            assert (u.key in memo.data_fluid) == (memo.nd2_relations(u.key) > 0)

    def test_header_fluidity_is_observed(self, mini_model):
        header = mini_model.states["s1"].root_fragment().find(1)
        assert mini_model.memo.observed[mini_model.memo.representative(header)]


class TestPersistence:
    def test_round_trip(self, memo, addressbook):
        register_state(memo, addressbook["s6"])
        again = FragmentMemo.from_dict(memo.to_dict(), addressbook)
        assert again.to_dict() == memo.to_dict()
        assert is_data_fluid(again, addressbook["s6"].root_fragment().find(7))

    def test_unknown_state(self, memo):
        with pytest.raises(ParseError):
            FragmentMemo.from_dict(memo.to_dict(), {})
