"""
Tests for the patch refinement hierarchy
"""

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from lpcm.hierarchical import PatchNode, PatchTree


@pytest.fixture
def tree():
    """Part 0 (torus) split into 3 and 4; part 4 split again into 5 and 6"""
    t = PatchTree()
    t.add_root(PatchNode(0, 100, 1, 0))
    t.add_root(PatchNode(1, 40, 0, 1))
    t.add_child(0, PatchNode(3, 50, 0, 2))
    t.add_child(0, PatchNode(4, 50, 1, 1))
    t.add_child(4, PatchNode(5, 20, 0, 2))
    t.add_child(4, PatchNode(6, 30, 0, 1))
    return t


class TestPatchTree:

    def test_depths(self, tree):
        assert tree.get(0).depth == 0
        assert tree.get(3).depth == 1
        assert tree.get(6).depth == 2
        assert tree.max_depth() == 2

    def test_parent_links(self, tree):
        assert tree.get(5).parent == 4
        assert tree.get(4).parent == 0
        assert tree.get(1).parent is None

    def test_leaves(self, tree):
        assert [leaf.label for leaf in tree.leaves()] == [3, 5, 6, 1]

    def test_get_by_path(self, tree):
        assert tree.get_by_path("0/4/6").triangle_count == 30
        assert tree.get_by_path("1").label == 1
        assert tree.get_by_path("0/5") is None
        assert tree.get_by_path("9") is None
        assert tree.get_by_path("") is None

    def test_passes(self, tree):
        assert not tree.get(0).passes
        assert tree.get(3).passes
        assert tree.get(6).passes
        assert not PatchNode(7, 10, 0, 3).passes

    def test_duplicate_labels_rejected(self, tree):
        with pytest.raises(ValueError):
            tree.add_root(PatchNode(3, 1, 0, 0))
        with pytest.raises(ValueError):
            tree.add_child(1, PatchNode(5, 1, 0, 0))
        node = PatchNode(10, 1, 0, 0)
        node.add_child(PatchNode(11, 1, 0, 0))
        with pytest.raises(ValueError):
            node.add_child(PatchNode(11, 1, 0, 0))

    def test_relabel_marks_leaves(self, tree):
        tree.relabel({1: 0, 3: 1, 5: 2, 6: 3})
        assert [leaf.final_label for leaf in tree.leaves()] == [1, 2, 3, 0]
        assert tree.get(0).final_label is None

    def test_display(self, tree):
        tree.get(1).unresolved = True
        text = tree.display_tree()
        assert "part 0: 100 triangles, genus 1, 0 boundaries [split]" in text
        assert "[ok]" in text
        assert "\n    ├─ part 5" in text

    def test_json_export(self, tmp_path, tree):
        tree.relabel({1: 0, 3: 1, 5: 2, 6: 3})
        path = tmp_path / "tree.json"
        tree.export_hierarchy_json(str(path))
        data = json.loads(path.read_text())
        assert data["max_depth"] == 2
        assert [p["label"] for p in data["parts"]] == [0, 1]
        split = data["parts"][0]["children"][1]
        assert split["label"] == 4
        assert [c["final_label"] for c in split["children"]] == [2, 3]


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
