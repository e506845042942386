"""Synthetic segmentation hierarchies over rendered true-label images.

Stands in for a learned boundary detector: superpixels come from a grid
split of the true segments, and the hierarchy agglomerates regions
bottom-up, preferring merges within one true label so that (absent
corruption) some cut reproduces the true segmentation exactly.  Corruption
injects spurious leaf splits and premature cross-label merges.

Merge heights mimic a boundary-strength hierarchy: within-label merges land
in a low band, cross-label merges in a high band, both strictly increasing
with merge order, so region persistence separates true objects from both
their internals and from over-merged blobs.
"""

import numpy as np

from ..segtree import SegTree

DEFAULT_CELL = 8


def _leaf_map(true_seg, noise, rng, cell):
    """Assign each pixel a leaf id: grid cells split by true label, plus
    random extra splits."""
    lab = true_seg.labels
    h, w = lab.shape
    leaf = np.zeros(h * w, dtype=np.int64)
    leaf_label = {}
    next_id = 0
    for cv in range(0, h, cell):
        for cu in range(0, w, cell):
            block = lab[cv:cv + cell, cu:cu + cell]
            vs, us = np.nonzero(np.ones_like(block))
            flat = (vs + cv) * w + (us + cu)
            for value in np.unique(block):
                sel = flat[block[vs, us] == value]
                leaf[sel] = next_id
                leaf_label[next_id] = int(value)
                next_id += 1
    # spurious splits
    if noise is not None and noise.split > 0:
        for lid in list(leaf_label):
            if rng.random() < noise.split:
                px = np.flatnonzero(leaf == lid)
                if len(px) < 2:
                    continue
                half = rng.permutation(px)[: len(px) // 2]
                leaf[half] = next_id
                leaf_label[next_id] = leaf_label[lid]
                next_id += 1
    return leaf, leaf_label


def _adjacency(leaf, shape):
    h, w = shape
    grid = leaf.reshape(h, w)
    pairs = set()
    a, b = grid[:, :-1].reshape(-1), grid[:, 1:].reshape(-1)
    for x, y in zip(a[a != b], b[a != b]):
        pairs.add((min(x, y), max(x, y)))
    a, b = grid[:-1, :].reshape(-1), grid[1:, :].reshape(-1)
    for x, y in zip(a[a != b], b[a != b]):
        pairs.add((min(x, y), max(x, y)))
    adj = {}
    for x, y in pairs:
        adj.setdefault(x, set()).add(y)
        adj.setdefault(y, set()).add(x)
    return adj


def synth_tree(true_seg, noise=None, rng=None, cell=DEFAULT_CELL):
    """Build a segmentation tree whose leaves partition ``true_seg``.

    Merges run bottom-up with heights i/M for the i-th of M merges.  Pure
    same-label region pairs merge first (adjacent ones preferred); with
    probability ``noise.wrong_merge`` a step instead merges an adjacent
    cross-label pair.  Leaves of true label 0 are marked background.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    h, w = true_seg.labels.shape
    leaf, leaf_label = _leaf_map(true_seg, noise, rng, cell)
    adj = _adjacency(leaf, (h, w))

    # region bookkeeping: id -> pure true label (None once mixed)
    purity = dict(leaf_label)
    active = set(leaf_label)
    adj = {i: adj.get(i, set()) for i in active}
    parents = {i: -1 for i in active}
    heights = {i: 0.0 for i in active}
    leaf_pixels = {i: np.flatnonzero(leaf == i) for i in active}
    background = {i for i in active if leaf_label[i] == 0}

    next_id = max(active) + 1
    total_merges = len(active) - 1
    wrong_p = noise.wrong_merge if noise is not None else 0.0

    for step in range(total_merges):
        by_label = {}
        for r in active:
            if purity[r] is not None:
                by_label.setdefault(purity[r], []).append(r)
        same_adj, same_any = [], []
        for group in by_label.values():
            gs = set(group)
            for r in group:
                for s in adj[r]:
                    if s in gs and r < s:
                        same_adj.append((r, s))
            if len(group) > 1 and not same_adj:
                group = sorted(group)
                for i in range(len(group) - 1):
                    same_any.append((group[i], group[i + 1]))
        cross = [(min(r, s), max(r, s)) for r in sorted(active) for s in sorted(adj[r])
                 if r < s and not (purity[r] is not None and purity[r] == purity[s])]
        same = same_adj or same_any
        if same and cross:
            pool = cross if rng.random() < wrong_p else same
        else:
            pool = same or cross
        r, s = pool[rng.integers(len(pool))]

        nid = next_id
        next_id += 1
        parents[r] = parents[s] = nid
        parents[nid] = -1
        frac = (step + 1) / (total_merges + 1)
        same_label = purity[r] is not None and purity[r] == purity[s]
        heights[nid] = 0.15 * frac if same_label else 0.6 + 0.4 * frac
        purity[nid] = purity[r] if purity[r] == purity[s] else None
        adj[nid] = (adj[r] | adj[s]) - {r, s}
        for t in adj[nid]:
            adj[t].discard(r)
            adj[t].discard(s)
            adj[t].add(nid)
        del adj[r], adj[s]
        active.discard(r)
        active.discard(s)
        active.add(nid)

    return SegTree.build(w, h, parents, heights, leaf_pixels, background)
