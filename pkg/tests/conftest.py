"""Shared builders for the test suite: random trees, cut enumeration, grids."""

from itertools import product

import numpy as np
import pytest

from mhvox import AdditiveValue, GridSpec, SegTree, VoxelState


def make_tree(parents, heights, leaf_pixels, width, height, background=()):
    return SegTree.build(width, height, parents, heights, leaf_pixels, background)


def two_level_tree():
    """Root 0 with two leaves covering a 2x1 image."""
    return make_tree({0: -1, 1: 0, 2: 0}, {0: 1.0, 1: 0.0, 2: 0.0},
                     {1: [0], 2: [1]}, width=2, height=1)


def random_tree(rng, n_leaves, allow_triples=True):
    """Random merge hierarchy over a 1-pixel-per-leaf image.

    Leaves are single pixels of an (n_leaves x 1) image; regions merge in
    random order (pairs, occasionally triples) with strictly increasing
    heights.
    """
    parents = {i: -1 for i in range(n_leaves)}
    heights = {i: 0.0 for i in range(n_leaves)}
    leaf_pixels = {i: [i] for i in range(n_leaves)}
    active = list(range(n_leaves))
    next_id = n_leaves
    step = 0
    while len(active) > 1:
        arity = 3 if (allow_triples and len(active) >= 3 and rng.random() < 0.3) else 2
        picks = sorted(rng.choice(len(active), size=arity, replace=False), reverse=True)
        kids = [active.pop(i) for i in picks]
        step += 1
        for k in kids:
            parents[k] = next_id
        parents[next_id] = -1
        heights[next_id] = float(step)
        active.append(next_id)
        next_id += 1
    return make_tree(parents, heights, leaf_pixels, width=n_leaves, height=1)


def enumerate_cuts(tree, nid=None):
    """Every valid cut below (and including) a node, by brute-force recursion."""
    if nid is None:
        nid = tree.root
    cuts = [frozenset((nid,))]
    if not tree.is_leaf(nid):
        child_cuts = [enumerate_cuts(tree, c) for c in tree.children(nid)]
        for combo in product(*child_cuts):
            cuts.append(frozenset().union(*combo))
    return cuts


def random_additive_value(tree, rng, lo=-1.0, hi=1.0):
    return AdditiveValue({nid: float(rng.uniform(lo, hi)) for nid in tree.node_ids()})


def random_cut(tree, rng, stop_p=0.4):
    """A random valid cut: from the root, stop or recurse per node."""
    cut = []
    stack = [tree.root]
    while stack:
        nid = stack.pop()
        if tree.is_leaf(nid) or rng.random() < stop_p:
            cut.append(nid)
        else:
            stack.extend(tree.children(nid))
    return frozenset(cut)


def random_state(spec, rng, n_objects=3):
    """Random labeled grid with blobby objects (random boxes per label)."""
    labels = np.zeros(spec.dims, dtype=np.uint16)
    dims = np.array(spec.dims)
    for k in range(1, n_objects + 1):
        lo = rng.integers(0, np.maximum(dims - 2, 1))
        hi = np.minimum(lo + rng.integers(1, 5, size=3), dims)
        labels[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = k
    return VoxelState(spec, labels)


@pytest.fixture
def small_spec():
    return GridSpec((10, 10, 10), 0.01)
