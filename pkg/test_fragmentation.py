import random

import pytest

from pagefrag.config import FragConfig
from pagefrag.errors import InvalidConfig, NodeNotInFragment
from pagefrag.fragmentation import anchor_node, closest, fragment, relative_locator


@pytest.fixture(scope="module")
def s3_root(addressbook):
    return addressbook["s3"].root_fragment()


def stacked_layout(rng, boxes, width=200):
    """Full-width boxes stacked top to bottom under one body, each holding a paragraph."""
    records = [{"id": 0, "tag": "body", "bbox": None, "children": []}]
    y = 10
    for _ in range(boxes):
        h = rng.randint(20, 60)
        box, para = len(records), len(records) + 1
        records.append({"id": box, "tag": "div", "bbox": [10, y, width - 20, h], "children": [para]})
        records.append({"id": para, "tag": "p", "text": "x", "bbox": [15, y + 5, width - 40, h - 10]})
        records[0]["children"].append(box)
        y += h + rng.choice([0, 4, 8, 15, 25, 45, 90])
    records[0]["bbox"] = [0, 0, width, y + 10]
    return records


def nested_layout(rng, max_depth=3):
    """Random tree of boxes nested inside their parents and stacked with random gaps."""
    records = []

    def box(x, y, w, h, depth):
        nid = len(records)
        rec = {"id": nid, "tag": rng.choice(["div", "section", "p", "span"]), "bbox": [x, y, w, h], "children": []}
        records.append(rec)
        if depth < max_depth:
            cy = y + rng.randint(0, 6)
            for _ in range(rng.randint(0, 4)):
                ch = rng.randint(6, max(6, h // 2))
                if cy + ch > y + h:
                    break
                rec["children"].append(box(x + 2, cy, w - 4, ch, depth + 1))
                cy += ch + rng.randint(0, 20)
        return nid

    box(0, 0, 300, 400, 0)
    return records


class TestFragmentHierarchy:
    """Separator-based splitting of the addressbook list page."""

    def test_root_holds_every_node(self, addressbook, s3_root):
        assert s3_root.frag_id == 0
        assert s3_root.useful
        assert s3_root.nodes == frozenset(addressbook["s3"].dom.order)

    def test_top_level_blocks(self, s3_root):
        boxes = [c.bbox for c in s3_root.useful_children]
        assert boxes == [(20, 20, 984, 80), (20, 120, 984, 40), (20, 180, 984, 95)]

    def test_ids_are_preorder(self, s3_root):
        assert [f.frag_id for f in s3_root.walk()] == list(range(8))
        assert [f.frag_id for f in s3_root.useful_fragments()] == [0, 1, 4, 5, 6, 7]

    def test_header_children_are_not_useful(self, s3_root):
        header = s3_root.find(1)
        assert [c.useful for c in header.children] == [False, False]
        assert header.useful_children == []

    def test_table_rows(self, s3_root):
        content = s3_root.find(5)
        assert [c.bbox for c in content.useful_children] == [(30, 190, 964, 30), (30, 235, 964, 30)]

    def test_fragments_nest(self, s3_root):
        for f in s3_root.walk():
            for c in f.children:
                assert c.nodes <= f.nodes
                assert c.depth == f.depth + 1
            for a, b in zip(f.children, f.children[1:]):
                assert not (a.nodes & b.nodes)

    def test_non_useful_fragments_are_leaves(self, s3_root):
        assert all(not f.children for f in s3_root.walk() if not f.useful)

    def test_deterministic(self, addressbook):
        a = fragment(addressbook["s5"]).to_dict()
        b = fragment(addressbook["s5"]).to_dict()
        assert a == b

    def test_cached_per_config(self, addressbook):
        s1 = addressbook["s1"]
        assert s1.root_fragment() is s1.root_fragment(FragConfig())
        assert s1.root_fragment(FragConfig(min_nodes=1)) is not s1.root_fragment()

    def test_labels(self, s3_root):
        assert s3_root.find(7).label == "s3#F7"
        assert s3_root.find(7).key == ("s3", 7)

    def test_two_stacked_boxes(self, make_snapshot):
        snap = make_snapshot([
            {"id": 0, "tag": "body", "bbox": [0, 0, 200, 200], "children": [1, 3]},
            {"id": 1, "tag": "div", "bbox": [10, 10, 180, 50], "children": [2]},
            {"id": 2, "tag": "p", "text": "top", "bbox": [20, 20, 100, 20]},
            {"id": 3, "tag": "div", "bbox": [10, 100, 180, 50], "children": [4]},
            {"id": 4, "tag": "p", "text": "bottom", "bbox": [20, 110, 100, 20]},
        ])
        root = fragment(snap, FragConfig(min_separator_px=20))
        assert len(root.children) == 2
        assert [c.bbox for c in root.children] == [(10, 10, 180, 50), (10, 100, 180, 50)]
        assert fragment(snap, FragConfig(min_separator_px=40)).children == []

    def test_coarser_with_wider_separators(self, make_snapshot):
        rng = random.Random(11)
        gaps = [0, 5, 10, 20, 40, 80, 120]
        for _ in range(40):
            snap = make_snapshot(stacked_layout(rng, rng.randint(1, 6)), viewport=(200, 800))
            roots = [fragment(snap, FragConfig(min_separator_px=g)) for g in gaps]
            for fine, coarse in zip(roots, roots[1:]):
                assert len(coarse.children) <= len(fine.children)
                if coarse.children:
                    for child in fine.children:
                        assert sum(1 for c in coarse.children if child.nodes <= c.nodes) == 1


class TestUsefulness:
    def test_thresholds_control_usefulness(self, addressbook):
        loose = fragment(addressbook["s1"], FragConfig(min_nodes=1, min_area=0))
        strict = fragment(addressbook["s1"], FragConfig(min_nodes=30))
        assert len(loose.useful_fragments()) > len(fragment(addressbook["s1"]).useful_fragments())
        assert [f.frag_id for f in strict.useful_fragments()] == [0]

    def test_single_node_page(self, make_snapshot):
        root = fragment(make_snapshot([{"id": 0, "tag": "html", "bbox": [0, 0, 10, 10]}]))
        assert root.useful and root.children == []

    def test_invalid_config(self):
        with pytest.raises(InvalidConfig):
            FragConfig(min_nodes=0)
        with pytest.raises(InvalidConfig):
            FragConfig(min_separator_px=-1)

    @pytest.mark.parametrize("field,values", [
        ("min_nodes", [1, 2, 3, 5, 8, 13, 40]),
        ("min_area", [0, 100, 2500, 10000, 40000, 200000]),
    ])
    def test_stricter_thresholds_never_add_useful_fragments(self, addressbook, field, values):
        for snap in addressbook.values():
            counts = [len(fragment(snap, FragConfig(**{field: v})).useful_fragments()) for v in values]
            assert counts == sorted(counts, reverse=True)


class TestClosest:
    def test_cell_maps_to_its_row(self, s3_root):
        assert closest(18, s3_root).frag_id == 7

    def test_node_inside_non_useful_child(self, addressbook):
        root = addressbook["s1"].root_fragment()
        # the lone button is too small to be useful, so its content block is closest
        assert closest(11, root).frag_id == 5
        assert closest(3, root).frag_id == 1

    def test_wrapper_node_stays_in_parent(self, s3_root):
        assert closest(1, s3_root) is s3_root

    def test_node_outside(self, s3_root):
        with pytest.raises(NodeNotInFragment):
            closest(3, s3_root.find(7))

    def test_matches_linear_scan(self, make_snapshot):
        rng = random.Random(3)
        cfg = FragConfig(min_nodes=1, min_area=0, min_separator_px=4)
        for _ in range(60):
            snap = make_snapshot(nested_layout(rng), viewport=(300, 400))
            root = fragment(snap, cfg)
            for nid in snap.dom.order:
                holders = [f for f in root.walk() if f.useful and nid in f.nodes]
                assert closest(nid, root) is max(holders, key=lambda f: f.depth)


class TestLocators:
    def test_anchor_is_row(self, s3_root):
        assert anchor_node(s3_root.find(7)) == 17

    def test_relative_locator(self, s3_root):
        row = s3_root.find(7)
        assert relative_locator(18, row) == "./td[1]"
        assert relative_locator(17, row) == "."
        with pytest.raises(NodeNotInFragment):
            relative_locator(3, row)
