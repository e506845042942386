"""Region-merge segmentation hierarchies and tree cuts.

A tree node owns a contiguous set of image pixels; children partition their
parent's region and leaves are atomic superpixels.  A *cut* is a set of
nodes separating the root from the leaves — its regions partition the image
into one segmentation.  Modules downstream sample cuts, score them, and
rasterize them to label images.
"""

import math
from dataclasses import dataclass

import numpy as np

from .images import SegmentationImage

UP = "up"
DOWN = "down"


@dataclass(frozen=True)
class _Node:
    id: int
    parent: int          # -1 for the root
    children: tuple
    height: float        # merge height; strictly increasing toward the root
    pixels: np.ndarray   # flat row-major pixel indices, sorted
    background: bool

    @property
    def size(self):
        return len(self.pixels)

    @property
    def is_leaf(self):
        return not self.children


class SegTree:
    """Immutable segmentation hierarchy over a width x height pixel grid."""

    def __init__(self, width, height, nodes):
        """``nodes``: mapping id -> dict(parent, height, children, pixels, background).

        Prefer :meth:`build` which derives children lists and internal-node
        pixel sets from leaves.
        """
        self.width = int(width)
        self.height = int(height)
        self._nodes = nodes
        roots = [n.id for n in nodes.values() if n.parent == -1]
        if len(roots) != 1:
            raise ValueError(f"tree must have exactly one root, found {len(roots)}")
        self.root = roots[0]
        self._validate()

    @classmethod
    def build(cls, width, height, parents, heights, leaf_pixels, background_leaves=()):
        """Construct a tree from parent links and per-leaf pixel lists.

        ``parents[i]`` is the parent id of node i (-1 for the root),
        ``heights[i]`` its merge height, ``leaf_pixels`` maps leaf ids to
        flat row-major pixel indices.  Background status propagates from
        ``background_leaves`` to every internal node whose leaves are all
        background.
        """
        ids = sorted(parents)
        children = {i: [] for i in ids}
        for i in ids:
            p = parents[i]
            if p != -1:
                children[p].append(i)
        pixels = {}
        background = {}

        def fill(nid):
            kids = children[nid]
            if not kids:
                px = np.asarray(sorted(leaf_pixels[nid]), dtype=np.int64)
                bg = nid in background_leaves
            else:
                parts = [fill(k) for k in kids]
                px = np.sort(np.concatenate([p for p, _ in parts]))
                bg = all(b for _, b in parts)
            pixels[nid] = px
            background[nid] = bg
            return px, bg

        root = [i for i in ids if parents[i] == -1]
        if len(root) != 1:
            raise ValueError("exactly one node must have parent -1")
        fill(root[0])
        nodes = {}
        for i in ids:
            px = pixels[i]
            px.flags.writeable = False
            nodes[i] = _Node(i, parents[i], tuple(sorted(children[i])),
                             float(heights[i]), px, background[i])
        return cls(width, height, nodes)

    def _validate(self):
        total = self.width * self.height
        root = self._nodes[self.root]
        if root.size != total:
            raise ValueError("root region must cover the whole image")
        seen = np.zeros(total, dtype=np.int32)
        for n in self._nodes.values():
            if n.is_leaf:
                seen[n.pixels] += 1
            else:
                if len(n.children) < 2:
                    raise ValueError(f"internal node {n.id} must have >= 2 children")
                ksize = sum(self._nodes[c].size for c in n.children)
                if ksize != n.size:
                    raise ValueError(f"children of node {n.id} do not partition its region")
                for c in n.children:
                    if not self._nodes[c].height < n.height:
                        raise ValueError("merge heights must increase strictly toward the root")
        if not np.all(seen == 1):
            raise ValueError("leaf regions must partition the image")

    # -- structure access ---------------------------------------------------
    def node_ids(self):
        return sorted(self._nodes)

    def parent(self, nid):
        return self._nodes[nid].parent

    def children(self, nid):
        return self._nodes[nid].children

    def siblings(self, nid):
        p = self._nodes[nid].parent
        return self._nodes[p].children if p != -1 else (nid,)

    def is_leaf(self, nid):
        return self._nodes[nid].is_leaf

    def node_height(self, nid):
        return self._nodes[nid].height

    def pixels(self, nid):
        return self._nodes[nid].pixels

    def size(self, nid):
        return self._nodes[nid].size

    def is_background(self, nid):
        return self._nodes[nid].background

    def leaves(self):
        return [i for i in self.node_ids() if self._nodes[i].is_leaf]

    def postorder(self):
        out, stack = [], [(self.root, False)]
        while stack:
            nid, done = stack.pop()
            if done:
                out.append(nid)
            else:
                stack.append((nid, True))
                for c in self._nodes[nid].children:
                    stack.append((c, False))
        return out

    # -- cuts ----------------------------------------------------------------
    def is_valid_cut(self, cut):
        """True iff the cut's regions partition the image."""
        cover = np.zeros(self.width * self.height, dtype=np.int32)
        for nid in cut:
            if nid not in self._nodes:
                return False
            cover[self._nodes[nid].pixels] += 1
        return bool(np.all(cover == 1))


def apply_cut(tree, cut):
    """Rasterize a cut to a label image.

    Non-background cut nodes get labels 1..m in ascending node-id order;
    nodes marked background in the tree map to label 0.
    """
    if not tree.is_valid_cut(cut):
        raise ValueError("not a valid cut of this tree")
    flat = np.zeros(tree.width * tree.height, dtype=np.int32)
    label = 1
    for nid in sorted(cut):
        if tree.is_background(nid):
            continue
        flat[tree.pixels(nid)] = label
        label += 1
    return SegmentationImage(flat.reshape(tree.height, tree.width))


class ValueFunction:
    """Scores a tree cut; must be deterministic for a fixed tree."""

    additive = False

    def evaluate(self, cut):
        raise NotImplementedError


class AdditiveValue(ValueFunction):
    """Cut value as a sum of independent per-node scores."""

    additive = True

    def __init__(self, scores):
        self._scores = dict(scores)

    def node_score(self, nid):
        return self._scores[nid]

    def evaluate(self, cut):
        return math.fsum(self._scores[n] for n in cut)


class RegionCoherenceValue(AdditiveValue):
    """Reference additive score: persistence-weighted region size.

    A node scores its region size times how long it survives in the
    hierarchy (parent merge height minus its own), minus a flat per-segment
    penalty discouraging oversegmentation.  The root has no parent and
    scores just the penalty term.
    """

    def __init__(self, tree, penalty=0.0):
        scores = {}
        for nid in tree.node_ids():
            p = tree.parent(nid)
            top = tree.node_height(p) if p != -1 else tree.node_height(nid)
            scores[nid] = tree.size(nid) * (top - tree.node_height(nid)) - penalty
        super().__init__(scores)


def cut_value(tree, cut, v):
    """Evaluate ``v`` on a valid cut."""
    if not tree.is_valid_cut(cut):
        raise ValueError("not a valid cut of this tree")
    return v.evaluate(cut)


def optimal_cut(tree, v):
    """Exact argmax cut for an additive value function.

    Bottom-up dynamic programming over the hierarchy; ties break toward
    shallower nodes (fewer segments).
    """
    if not getattr(v, "additive", False):
        raise ValueError("optimal_cut requires an additive value function")
    best_value = {}
    best_cut = {}
    for nid in tree.postorder():
        here = v.node_score(nid)
        if tree.is_leaf(nid):
            best_value[nid] = here
            best_cut[nid] = frozenset((nid,))
        else:
            below = math.fsum(best_value[c] for c in tree.children(nid))
            if here >= below:
                best_value[nid] = here
                best_cut[nid] = frozenset((nid,))
            else:
                best_value[nid] = below
                best_cut[nid] = frozenset().union(*(best_cut[c] for c in tree.children(nid)))
    return best_cut[tree.root]


def move_node(tree, cut, node, direction):
    """Move the cut at ``node`` one level up or down the tree.

    Returns ``(new_cut, g_ratio)`` where g_ratio = g(c|c') / g(c'|c) for the
    uniform node-and-direction proposal, or ``None`` when the move is
    infeasible (down at a leaf; up at the root or with siblings missing from
    the cut).  A down move at a node with m children can be undone by an up
    move at any of the m children, hence the asymmetric ratios.
    """
    if node not in cut:
        raise ValueError(f"node {node} is not in the cut")
    if direction == DOWN:
        kids = tree.children(node)
        if not kids:
            return None
        new_cut = frozenset(cut - {node} | set(kids))
        m = len(kids)
        return new_cut, m * len(cut) / len(new_cut)
    if direction == UP:
        parent = tree.parent(node)
        if parent == -1:
            return None
        sibs = set(tree.children(parent))
        if not sibs <= cut:
            return None
        new_cut = frozenset(cut - sibs | {parent})
        m = len(sibs)
        return new_cut, len(cut) / (m * len(new_cut))
    raise ValueError(f"direction must be {UP!r} or {DOWN!r}")


# -- serialization ------------------------------------------------------------

def _runs(sorted_idx):
    if len(sorted_idx) == 0:
        return []
    breaks = np.flatnonzero(np.diff(sorted_idx) != 1) + 1
    starts = np.concatenate([[0], breaks])
    ends = np.concatenate([breaks, [len(sorted_idx)]])
    return [(int(sorted_idx[s]), int(e - s)) for s, e in zip(starts, ends)]


def tree_to_text(tree):
    """Serialize a tree to its line-based text format."""
    lines = [f"segtree 1", f"size {tree.width} {tree.height}"]
    for nid in tree.node_ids():
        parts = [f"node {nid} parent {tree.parent(nid)} height {tree.node_height(nid)!r}"]
        if tree.is_background(nid) and tree.is_leaf(nid):
            parts.append("bg")
        if tree.is_leaf(nid):
            runs = ",".join(f"{s}:{n}" for s, n in _runs(tree.pixels(nid)))
            parts.append(f"runs {runs}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def tree_from_text(text):
    """Parse the text produced by :func:`tree_to_text`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].split() != ["segtree", "1"]:
        raise ValueError("not a segtree text file")
    _, w, h = lines[1].split()
    parents, heights, leaf_pixels, bg = {}, {}, {}, set()
    for ln in lines[2:]:
        toks = ln.split()
        if toks[0] != "node":
            raise ValueError(f"unexpected line: {ln!r}")
        nid = int(toks[1])
        parents[nid] = int(toks[3])
        heights[nid] = float(toks[5])
        rest = toks[6:]
        if rest and rest[0] == "bg":
            bg.add(nid)
            rest = rest[1:]
        if rest and rest[0] == "runs":
            px = []
            for run in rest[1].split(","):
                s, n = run.split(":")
                px.extend(range(int(s), int(s) + int(n)))
            leaf_pixels[nid] = px
    return SegTree.build(int(w), int(h), parents, heights, leaf_pixels, bg)
