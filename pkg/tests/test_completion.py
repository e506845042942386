"""Surface extrusion completion and 2D-to-3D lifting."""

import numpy as np
import pytest

from mhvox import (CameraModel, DepthImage, GridSpec, SegmentationImage,
                   WeightedSample, extrusion_complete, free_space_refine, lift)


def top_down_camera(width=32, height=32, z=1.0, at=(0.32, 0.32)):
    return CameraModel.look_at((at[0], at[1] + 1e-4, z), (at[0], at[1], 0.0),
                               width, height, fov_deg=55.0)


@pytest.fixture
def grid():
    return GridSpec((64, 64, 32), 0.01)


class TestExtrusionComplete:
    def test_single_point_degenerate_bbox(self, grid):
        cam = top_down_camera()
        out = extrusion_complete(np.array([[0.32, 0.32, 0.10]]), cam, grid)
        assert len(out) == 1  # zero diagonal: just the surface voxel

    def test_face_extrudes_toward_plane(self, grid):
        # distant camera straight overhead: rays are effectively vertical;
        # surface samples at cell centers so drift cannot cross a boundary
        cam = top_down_camera(z=10.0)
        xs, ys = np.meshgrid(np.linspace(0.275, 0.365, 10),
                             np.linspace(0.275, 0.365, 10))
        pts = np.stack([xs.ravel(), ys.ravel(), np.full(100, 0.0499)], axis=1)
        out = extrusion_complete(pts, cam, grid)
        # 10x10 cm face 5 cm up: at most 10*10*5 cells, at least the face
        assert 100 <= len(out) <= 500
        assert np.all(out[:, 2] * grid.resolution >= 0)

    def test_below_plane_clamped(self, grid):
        cam = top_down_camera()
        pts = np.array([[0.32, 0.32, -0.05], [0.33, 0.32, 0.02]])
        out = extrusion_complete(pts, cam, grid)
        assert np.all(out[:, 2] >= 0)

    def test_empty_points_rejected(self, grid):
        with pytest.raises(ValueError):
            extrusion_complete(np.zeros((0, 3)), top_down_camera(), grid)


def make_sample(labels):
    return WeightedSample(1.0, SegmentationImage(labels), frozenset())


class TestLift:
    def test_no_return_segment_contributes_nothing(self, grid):
        cam = top_down_camera(16, 16)
        seg = np.zeros((16, 16), dtype=int)
        seg[4:8, 4:8] = 1
        depth = DepthImage(np.full((16, 16), np.inf))
        skipped = []
        out = lift(make_sample(seg), depth, cam, grid, skipped=skipped)
        assert out.occupied_count == 0
        assert skipped == [1]

    def test_flat_face_fills_slab(self, grid):
        cam = top_down_camera(32, 32)
        # a synthetic 'box top' return at z = 0.06 in the image center
        depth_val = cam.center_world[2] - 0.06
        d = np.full((32, 32), np.inf)
        seg = np.zeros((32, 32), dtype=int)
        seg[12:20, 12:20] = 1
        d[12:20, 12:20] = depth_val
        out = lift(make_sample(seg), DepthImage(d), cam, grid)
        occ = np.argwhere(out.labels == 1)
        assert len(occ) > 0
        zs = occ[:, 2] * grid.resolution
        # slab from the surface down toward the plane
        assert zs.max() <= 0.07
        assert zs.min() <= 0.02

    def test_disjoint_segments_stay_disjoint(self, grid):
        cam = top_down_camera(32, 32)
        d = np.full((32, 32), np.inf)
        seg = np.zeros((32, 32), dtype=int)
        seg[4:10, 4:10] = 1
        seg[20:26, 20:26] = 2
        d[seg > 0] = cam.center_world[2] - 0.05
        out = lift(make_sample(seg), DepthImage(d), cam, grid)
        m1 = out.labels == 1
        m2 = out.labels == 2
        assert m1.any() and m2.any()
        assert not (m1 & m2).any()

    def test_label_count_bounded_by_segments(self, grid):
        cam = top_down_camera(32, 32)
        d = np.full((32, 32), np.inf)
        seg = np.zeros((32, 32), dtype=int)
        seg[10:16, 10:16] = 3
        d[seg > 0] = cam.center_world[2] - 0.08
        out = lift(make_sample(seg), DepthImage(d), cam, grid)
        assert len(out.present_labels()) <= 1

    def test_respects_observed_free_volume(self, grid):
        # carving the lifted state with the same depth image removes nothing
        cam = top_down_camera(32, 32)
        d = np.full((32, 32), np.inf)
        seg = np.zeros((32, 32), dtype=int)
        seg[8:24, 8:24] = 1
        d[8:24, 8:24] = cam.center_world[2] - 0.12
        d[0:8, :] = cam.center_world[2]  # some observed table
        depth = DepthImage(d)
        out = lift(make_sample(seg), depth, cam, grid)
        refined, q_r = free_space_refine(out, depth, cam)
        assert q_r == 1.0
        assert refined == out

    def test_dims_mismatch(self, grid):
        cam = top_down_camera(16, 16)
        seg = np.zeros((8, 8), dtype=int)
        depth = DepthImage(np.full((16, 16), np.inf))
        with pytest.raises(ValueError):
            lift(make_sample(seg), depth, cam, grid)
