"""Simulator-backed stand-ins for the learned tracking components.

The mask oracle plays the role of a video object tracker: it returns the
true rendered mask of whichever world object dominates the query mask,
corrupted per the noise spec.  The correspondence oracle plays the role of
feature matching: true surface matches under the objects' ground-truth
motions, plus Gaussian noise and uniform outliers.
"""

import numpy as np
from scipy import ndimage

from ..registration import Correspondence
from ..tracking import CorrespondenceSource, MaskTracker
from .render import render
from .scene import object_motion


def _corrupt_mask(mask, noise, rng):
    if noise is None:
        return mask
    if noise.dropout > 0 and rng.random() < noise.dropout:
        return np.zeros_like(mask)
    r = noise.morph_radius
    if r > 0:
        mode = noise.mode
        if mode == "random":
            mode = "dilate" if rng.random() < 0.5 else "erode"
        if mode == "dilate":
            return ndimage.binary_dilation(mask, iterations=r)
        return ndimage.binary_erosion(mask, iterations=r)
    return mask


class OracleMaskTracker(MaskTracker):
    """Perfect-association mask tracker with configurable corruption."""

    def __init__(self, world_t, world_t1, cam, noise=None, rng=None):
        self._seg_t = render(world_t, cam).labels
        self._seg_t1 = render(world_t1, cam).labels
        self._noise = noise.mask if noise is not None else None
        self._rng = rng if rng is not None else np.random.default_rng(0)

    def track(self, frames, mask, bbox):
        under = self._seg_t.labels[mask]
        under = under[under > 0]
        if len(under) == 0:
            return np.zeros_like(mask)
        counts = np.bincount(under)
        label = int(counts.argmax())
        truth = self._seg_t1.labels == label
        return _corrupt_mask(truth, self._noise, self._rng)


def synth_correspondences(world_t, world_t1, cam, label, noise=None, rng=None,
                          pixel_mask=None):
    """Matched surface point pairs for one world object between two frames.

    Samples the object's surface pixels visible at t (optionally restricted
    to ``pixel_mask``), maps them through the object's true motion, keeps
    those still visible at t+1, then perturbs destinations with Gaussian
    noise and replaces an outlier fraction with uniform points in the
    workspace.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    cn = noise.corr if noise is not None else None
    obs_t = render(world_t, cam)
    obs_t1 = render(world_t1, cam)
    sel = obs_t.labels.mask(label) & obs_t.depth.valid
    if pixel_mask is not None:
        sel &= pixel_mask
    vs, us = np.nonzero(sel)
    if len(us) == 0:
        return []
    max_count = cn.max_count if cn is not None else 120
    if len(us) > max_count:
        pick = rng.choice(len(us), max_count, replace=False)
        vs, us = vs[pick], us[pick]
    src = cam.backproject(us, vs, obs_t.depth.depth[vs, us])
    motion = object_motion(world_t, world_t1, label)
    dst = motion.apply(src)

    # visibility at t+1: the moved point must match the rendered surface
    u1, v1, rng_d, in_front = cam.project_points(dst)
    px = np.floor(u1).astype(int)
    py = np.floor(v1).astype(int)
    ok = in_front & (px >= 0) & (px < cam.width) & (py >= 0) & (py < cam.height)
    vis = np.zeros(len(dst), dtype=bool)
    meas = obs_t1.depth.depth[py[ok], px[ok]]
    vis[ok] = np.isfinite(meas) & (np.abs(meas - rng_d[ok]) < 0.02)
    src, dst = src[vis], dst[vis]
    if len(src) == 0:
        return []

    if cn is not None and cn.sigma > 0:
        dst = dst + rng.normal(0, cn.sigma, dst.shape)
    if cn is not None and cn.outlier_fraction > 0:
        n_out = int(round(cn.outlier_fraction * len(src)))
        if n_out:
            which = rng.choice(len(src), n_out, replace=False)
            wx, wy, wz = world_t.workspace
            dst[which] = rng.uniform([0, 0, 0], [wx, wy, wz], size=(n_out, 3))
    return [Correspondence(tuple(s), tuple(d)) for s, d in zip(src, dst)]


class SimCorrespondenceSource(CorrespondenceSource):
    """Feature-matching stand-in driven by ground-truth motion.

    The query mask may span several world objects (an undersegmented
    hypothesis); each contributes matches under its own true motion, which
    is exactly the mixture a robust fit must untangle.
    """

    def __init__(self, world_t, world_t1, cam, noise=None, rng=None):
        self._world_t = world_t
        self._world_t1 = world_t1
        self._cam = cam
        self._noise = noise
        self._rng = rng if rng is not None else np.random.default_rng(0)
        self._seg_t = render(world_t, cam).labels

    def correspondences(self, label, mask_src, mask_dst):
        under = self._seg_t.labels[mask_src]
        present = np.unique(under[under > 0])
        out = []
        for world_label in present:
            out.extend(synth_correspondences(
                self._world_t, self._world_t1, self._cam, int(world_label),
                self._noise, self._rng, pixel_mask=mask_src))
        return out
