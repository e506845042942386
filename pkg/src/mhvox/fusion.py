"""Fuse tracked predictions with freshly sampled states into a new population.

Objects from a predicted and a sampled state that overlap in voxel space
conflict; each connected component of the conflict graph is resolved by a
random precedence order, merging object pairs with a probability that favors
joining similar-sized, strongly overlapping objects and otherwise letting
the higher-precedence object win contested voxels.  Candidates are weighted
by history, sample quality, and refinement quality, then resampled down to
the population size, always keeping the best.
"""

from dataclasses import dataclass, field

import numpy as np

from .metrics import quality
from .voxels import VoxelState, mode_filter, relabel_contiguous

PREDICTED = 0
SAMPLED = 1


@dataclass
class Hypothesis:
    """One weighted volumetric segmentation hypothesis."""

    state: VoxelState
    weight: float
    lineage: tuple = (None, None, 0)   # (parent hypothesis id, sample id, t)
    refine_quality: float = 1.0
    hyp_id: int = None

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError("hypothesis weight must be positive")


@dataclass
class HypothesisSet:
    """The tracked population at one time index."""

    hypotheses: list
    t: int = 0

    def __len__(self):
        return len(self.hypotheses)

    def __iter__(self):
        return iter(self.hypotheses)

    def max_weight(self):
        return max(self.hypotheses, key=lambda h: (h.weight, -self.hypotheses.index(h)))


@dataclass(frozen=True)
class ObjectNode:
    """One object of one source state inside a conflict graph."""

    side: int      # PREDICTED or SAMPLED
    label: int
    size: int


@dataclass
class ConflictGraph:
    """Cross-state object overlaps: nodes per object, IOU-weighted edges."""

    nodes: list
    edges: list = field(default_factory=list)   # (node index, node index, iou)


def build_conflict_graph(predicted, sampled):
    """Conflict graph between two states on the same grid.

    One node per nonzero label of each state; an edge joins every
    predicted/sampled pair whose voxel IOU is positive, weighted by that
    IOU.
    """
    if predicted.spec != sampled.spec:
        raise ValueError("states live on different grids")
    pa = predicted.labels.reshape(-1).astype(np.int64)
    sa = sampled.labels.reshape(-1).astype(np.int64)
    p_labels = predicted.present_labels()
    s_labels = sampled.present_labels()
    p_sizes = np.bincount(pa, minlength=int(pa.max(initial=0)) + 1)
    s_sizes = np.bincount(sa, minlength=int(sa.max(initial=0)) + 1)
    nodes = [ObjectNode(PREDICTED, int(k), int(p_sizes[k])) for k in p_labels]
    nodes += [ObjectNode(SAMPLED, int(k), int(s_sizes[k])) for k in s_labels]
    index = {(n.side, n.label): i for i, n in enumerate(nodes)}
    edges = []
    both = (pa > 0) & (sa > 0)
    if both.any():
        pk, sk = pa[both], sa[both]
        pairs, counts = np.unique(np.stack([pk, sk]), axis=1, return_counts=True)
        for (kp, ks), inter in zip(pairs.T, counts):
            union = p_sizes[kp] + s_sizes[ks] - inter
            edges.append((index[(PREDICTED, int(kp))], index[(SAMPLED, int(ks))],
                          float(inter / union)))
    return ConflictGraph(nodes, edges)


def connected_components(graph):
    """Node-index components of the conflict graph, each sorted ascending."""
    n = len(graph.nodes)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b, _ in graph.edges:
        parent[find(a)] = find(b)
    comps = {}
    for i in range(n):
        comps.setdefault(find(i), []).append(i)
    return sorted(sorted(c) for c in comps.values())


@dataclass
class MergeSample:
    """A sampled resolution of one conflict component.

    ``group`` maps node index to its merged group id; nodes sharing a group
    share one output label.  ``rank`` is the precedence of each node
    (lower = higher precedence); for contested voxels between unmerged
    groups the lower-rank claimant wins.
    """

    group: dict
    rank: dict


def sample_merges(graph, component, rng, order=None):
    """Sample merges within one connected component.

    Nodes get a uniformly random precedence order (edges orient child ->
    parent toward higher precedence); each edge merges its child n1 into its
    parent n2 with probability min(1, w_e * |n2| / |n1|^2).  Pass ``order``
    (node indices, highest precedence first) to pin the orientation, e.g.
    for statistical tests.
    """
    if order is None:
        order = [component[i] for i in rng.permutation(len(component))]
    rank = {nid: r for r, nid in enumerate(order)}
    parent = {nid: nid for nid in component}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b, w in graph.edges:
        if a not in rank or b not in rank:
            continue
        child, par = (a, b) if rank[a] > rank[b] else (b, a)
        n1 = graph.nodes[child].size
        n2 = graph.nodes[par].size
        p = min(1.0, w * n2 / (n1 * n1))
        if rng.random() < p:
            parent[find(child)] = find(par)
    group = {nid: find(nid) for nid in component}
    return MergeSample(group, rank)


def _compose(predicted, sampled, graph, merges):
    """Write one merged state from the two sources and sampled merges."""
    spec = predicted.spec
    node_index = {(n.side, n.label): i for i, n in enumerate(graph.nodes)}
    group_of = {}
    rank_of = {}
    for ms in merges:
        group_of.update(ms.group)
        rank_of.update(ms.rank)
    # canonical output label per group, ordered by the group's smallest node index
    groups = sorted({g for g in group_of.values()})
    out_label = {g: i + 1 for i, g in enumerate(groups)}

    def lut(state, side):
        top = int(state.labels.max(initial=0))
        node = np.full(top + 1, -1, dtype=np.int64)
        lab = np.zeros(top + 1, dtype=np.uint16)
        rnk = np.full(top + 1, np.iinfo(np.int64).max, dtype=np.int64)
        for k in state.present_labels():
            i = node_index[(side, int(k))]
            node[k] = i
            lab[k] = out_label[group_of[i]]
            rnk[k] = rank_of[i]
        return lab, rnk

    p_lab, p_rank = lut(predicted, PREDICTED)
    s_lab, s_rank = lut(sampled, SAMPLED)
    pa = predicted.labels
    sa = sampled.labels
    out = np.where(pa > 0, p_lab[pa], 0).astype(np.uint16)
    s_only = (sa > 0) & (pa == 0)
    out[s_only] = s_lab[sa[s_only]]
    contested = (pa > 0) & (sa > 0)
    if contested.any():
        s_wins = contested & (s_rank[sa] < p_rank[pa])
        out[s_wins] = s_lab[sa[s_wins]]
    return VoxelState(spec, out, len(groups))


def hypothesis_weight(w_prev, s_new, q_r, lam):
    """Candidate weight: history times sample quality times refinement quality^lambda."""
    if not (w_prev > 0 and s_new > 0 and q_r > 0):
        raise ValueError("weight factors must be positive")
    return w_prev * s_new * (q_r ** lam)


def fuse_populations(predicted, sampled, eta, rng, lam=3.0,
                     mode_window=3, mode_consensus=0.6):
    """Cross every predicted hypothesis with every sampled state, eta times each.

    For each (predicted, sampled) pair and each of ``eta`` independent merge
    draws: build the conflict graph, sample merges per connected component,
    compose the merged state (unconflicted objects pass through untouched),
    clean it with the consensus mode filter, and relabel contiguously.
    Candidate weights combine the parent's weight, the sample weight, and
    the parent's refinement quality.
    """
    if eta < 1:
        raise ValueError("eta must be >= 1")
    candidates = []
    for j, hyp in enumerate(predicted):
        for i, (s_weight, s_state) in enumerate(sampled):
            graph = build_conflict_graph(hyp.state, s_state)
            comps = connected_components(graph)
            for _ in range(eta):
                merges = [sample_merges(graph, c, rng) for c in comps]
                fused = _compose(hyp.state, s_state, graph, merges)
                fused = mode_filter(fused, mode_window, mode_consensus)
                fused, _ = relabel_contiguous(fused)
                w = hypothesis_weight(hyp.weight, s_weight, hyp.refine_quality, lam)
                candidates.append(Hypothesis(fused, w,
                                             lineage=(hyp.hyp_id, i, predicted.t + 1)))
    return candidates


def resample(candidates, n, rng, t=0):
    """Downsample candidates to a population of exactly ``n``.

    The maximum-weight candidate always survives; the remaining slots fill
    by weighted sampling without replacement.  Fewer candidates than slots
    duplicate in descending weight order.
    """
    if not candidates:
        raise ValueError("no candidates to resample")
    if len(candidates) <= n:
        ordered = sorted(candidates, key=lambda h: -h.weight)
        chosen = [ordered[i % len(ordered)] for i in range(n)]
        return HypothesisSet(chosen, t)
    weights = np.array([h.weight for h in candidates], dtype=float)
    elite = int(np.argmax(weights))
    chosen = [elite]
    avail = [i for i in range(len(candidates)) if i != elite]
    w = weights[avail]
    for _ in range(n - 1):
        p = w / w.sum()
        pick = int(rng.choice(len(avail), p=p))
        chosen.append(avail.pop(pick))
        w = np.delete(w, pick)
    return HypothesisSet([candidates[i] for i in chosen], t)


def score_population(hypotheses, truth):
    """Quality report of every hypothesis against a ground-truth state."""
    return [quality(h.state, truth) for h in hypotheses]
