"""Depth and true-label rendering by analytic ray-primitive intersection."""

from dataclasses import dataclass

import numpy as np

from ..images import DepthImage, SegmentationImage


@dataclass
class Observation:
    """One simulated sensor frame: range image plus true per-pixel labels.

    The label image is consumed only by the learned-component stand-ins
    (tree synthesis and tracking oracles), never by the estimator itself.
    """

    depth: DepthImage
    labels: SegmentationImage


def render(world, cam, noise=None, rng=None):
    """Render the nearest hit per pixel; Gaussian range noise where requested.

    The support plane z=0 appears as a label-0 return within the workspace
    footprint; rays hitting nothing report no return.
    """
    if cam.center_world[2] <= 0:
        raise ValueError("camera must be above the support plane")
    dirs = cam.pixel_rays().reshape(-1, 3)
    origin = cam.center_world
    n = len(dirs)
    depth = np.full(n, np.inf)
    labels = np.zeros(n, dtype=np.int32)

    for obj in world.objects:
        inv = obj.pose.inverse()
        o_local = np.broadcast_to(inv.apply(origin), dirs.shape)
        d_local = dirs @ inv.rotation.T
        t = obj.primitive.intersect(o_local, d_local)
        closer = t < depth
        depth[closer] = t[closer]
        labels[closer] = obj.label

    # support plane inside the workspace
    dz = dirs[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_plane = -origin[2] / dz
    px = origin[0] + t_plane * dirs[:, 0]
    py = origin[1] + t_plane * dirs[:, 1]
    wx, wy, _ = world.workspace
    plane_hit = (dz < 0) & (t_plane > 0) & (t_plane < depth) \
        & (px >= 0) & (px <= wx) & (py >= 0) & (py <= wy)
    depth[plane_hit] = t_plane[plane_hit]
    labels[plane_hit] = 0

    if noise is not None and noise.depth_sigma > 0:
        if rng is None:
            raise ValueError("depth noise requires an rng")
        hit = np.isfinite(depth)
        depth[hit] = np.maximum(depth[hit]
                                + rng.normal(0, noise.depth_sigma, hit.sum()),
                                1e-6)
    shape = (cam.height, cam.width)
    return Observation(DepthImage(depth.reshape(shape)),
                       SegmentationImage(labels.reshape(shape)))
