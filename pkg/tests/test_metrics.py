"""Coverage/quality scoring against a direct double-loop oracle."""

import math

import numpy as np
import pytest

from mhvox import GridSpec, SegmentationImage, VoxelState, coverage, quality, quality_images

from conftest import random_state


def oracle_coverage(a, b):
    """Independent brute force: python sets, double loop over label pairs."""
    a = np.asarray(a).reshape(-1)
    b = np.asarray(b).reshape(-1)
    total = len(a)
    sets_a = {m: set(np.flatnonzero(a == m)) for m in sorted(set(a.tolist()))}
    sets_b = {n: set(np.flatnonzero(b == n)) for n in sorted(set(b.tolist()))}
    terms = []
    for m in sorted(sets_a):
        best = 0.0
        for n in sorted(sets_b):
            inter = len(sets_a[m] & sets_b[n])
            union = len(sets_a[m] | sets_b[n])
            best = max(best, inter / union)
        terms.append(len(sets_a[m]) * best)
    return math.fsum(terms) / total


def oracle_quality(a, b):
    return 0.5 * oracle_coverage(a, b) + 0.5 * oracle_coverage(b, a)


def ten_voxel_pair():
    """|V| = 10: first state has objects of 4 and 2 cells; second merges them."""
    spec = GridSpec((10, 1, 1), 0.01)
    xi = np.zeros(spec.dims, dtype=np.uint16)
    xi[0:4, 0, 0] = 1
    xi[4:6, 0, 0] = 2
    xj = np.zeros(spec.dims, dtype=np.uint16)
    xj[0:6, 0, 0] = 1
    return VoxelState(spec, xi), VoxelState(spec, xj)


class TestCoverage:
    def test_self_coverage_is_one(self, small_spec):
        s = random_state(small_spec, np.random.default_rng(0))
        assert coverage(s, s) == 1.0

    def test_hand_example_forward(self):
        xi, xj = ten_voxel_pair()
        assert coverage(xi, xj) == pytest.approx(11 / 15)

    def test_hand_example_reverse(self):
        xi, xj = ten_voxel_pair()
        assert coverage(xj, xi) == pytest.approx(0.8)

    def test_spec_mismatch(self):
        a = VoxelState.empty(GridSpec((2, 2, 2), 0.01))
        b = VoxelState.empty(GridSpec((2, 2, 2), 0.02))
        with pytest.raises(ValueError):
            coverage(a, b)


class TestQuality:
    def test_identical_states(self, small_spec):
        s = random_state(small_spec, np.random.default_rng(1))
        rep = quality(s, s)
        assert rep.q == 1.0 and rep.c_ij == 1.0 and rep.c_ji == 1.0

    def test_hand_example(self):
        xi, xj = ten_voxel_pair()
        rep = quality(xi, xj)
        assert rep.q == pytest.approx(23 / 30)

    def test_symmetric(self, small_spec):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a = random_state(small_spec, rng)
            b = random_state(small_spec, rng)
            assert quality(a, b).q == quality(b, a).q

    def test_match_table(self):
        xi, xj = ten_voxel_pair()
        rep = quality(xi, xj)
        assert rep.matches_ij[1] == (1, pytest.approx(4 / 6))
        assert rep.matches_ij[0] == (0, 1.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_oracle_exactly(self, seed):
        spec = GridSpec((16, 16, 16), 0.01)
        rng = np.random.default_rng(seed)
        a = random_state(spec, rng, n_objects=int(rng.integers(1, 6)))
        b = random_state(spec, rng, n_objects=int(rng.integers(1, 6)))
        rep = quality(a, b)
        assert rep.c_ij == oracle_coverage(a.labels, b.labels)
        assert rep.c_ji == oracle_coverage(b.labels, a.labels)
        assert rep.q == oracle_quality(a.labels, b.labels)

    def test_relabel_invariance_exact(self, small_spec):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = random_state(small_spec, rng, n_objects=4)
            b = random_state(small_spec, rng, n_objects=4)
            perm = {0: 0, 1: 4, 2: 1, 3: 3, 4: 2}
            relabeled = np.vectorize(perm.get)(a.labels).astype(np.uint16)
            a2 = VoxelState(small_spec, relabeled)
            assert quality(a2, b).q == quality(a, b).q

    def test_2d_overload_agrees_with_one_thick_grid(self):
        rng = np.random.default_rng(4)
        h, w = 12, 9
        la = rng.integers(0, 4, (h, w))
        lb = rng.integers(0, 4, (h, w))
        rep2d = quality_images(SegmentationImage(la), SegmentationImage(lb))
        spec = GridSpec((w, h, 1), 0.01)
        a3 = VoxelState(spec, la.T[:, :, None].astype(np.uint16))
        b3 = VoxelState(spec, lb.T[:, :, None].astype(np.uint16))
        rep3d = quality(a3, b3)
        assert rep2d.q == rep3d.q
