"""Per-object rigid motion estimation between two observations.

For every object in a hypothesis state: project it to a mask, hand the mask
to a pluggable mask tracker for the next frame, then estimate the object's
rigid motion — first from point correspondences via the robust consensus
fit, falling back to ICP on the masked clouds, and finally to identity.  A
trajectory maps object labels to transforms; labels it omits mean identity.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import RigidTransform
from .raycast import project
from .registration import icp, jlinkage

METHOD_CORRESPONDENCE = "correspondence"
METHOD_ICP = "icp"
METHOD_IDENTITY = "identity"


class MaskTracker:
    """Propagates an object mask from frame t to frame t+1.

    ``frames`` is the (observation_t, observation_t1) pair, ``mask`` the
    boolean pixel membership at t, ``bbox`` its dilated bounding box
    (u0, v0, u1, v1).  Implementations return a boolean mask with the same
    shape.
    """

    def track(self, frames, mask, bbox):
        raise NotImplementedError


class CorrespondenceSource:
    """Produces matched 3D point pairs for an object between two frames.

    Stands in for feature matching on real imagery; the simulator supplies
    an implementation with known matches and injected outliers.
    """

    def correspondences(self, label, mask_src, mask_dst):
        raise NotImplementedError


@dataclass
class TrackRecord:
    """Diagnostics for one tracked object."""

    label: int
    method: str
    inliers: int = 0
    fit_error: float = float("nan")


def bounding_box(mask, dilate=0.1):
    """Tight axis-aligned pixel box of a mask, grown by ``dilate`` per side.

    Returns (u0, v0, u1, v1) half-open, clipped to the image, or None for an
    empty mask.
    """
    vs, us = np.nonzero(mask)
    if len(us) == 0:
        return None
    u0, u1 = int(us.min()), int(us.max()) + 1
    v0, v1 = int(vs.min()), int(vs.max()) + 1
    du = int(np.ceil((u1 - u0) * dilate))
    dv = int(np.ceil((v1 - v0) * dilate))
    h, w = mask.shape
    return (max(0, u0 - du), max(0, v0 - dv), min(w, u1 + du), min(h, v1 + dv))


def masked_cloud(depth, cam, mask):
    """Back-project the valid depth pixels under ``mask`` to world points."""
    sel = mask & depth.valid
    vs, us = np.nonzero(sel)
    if len(us) == 0:
        return np.empty((0, 3))
    return cam.backproject(us, vs, depth.depth[vs, us])


def track_objects(frames, x_t, cam, tracker, corr_source, cfg, diagnostics=None):
    """Estimate a rigid transform for every object of ``x_t``.

    Follows the accept cascade: a consensus fit from correspondences wins if
    its inlier count exceeds ``cfg.thres_inliers``; otherwise ICP on the
    masked clouds wins if its fit error stays below ``cfg.thres_icp``;
    otherwise the object keeps an identity transform.  Per-object outcomes
    are appended to ``diagnostics`` when a list is supplied.
    """
    obs_t, obs_t1 = frames
    s_t = project(x_t, cam)
    trajectory = {}
    rng = np.random.default_rng(cfg.seed)
    for k in x_t.present_labels():
        record = TrackRecord(label=int(k), method=METHOD_IDENTITY)
        mask_t = s_t.labels == k
        transform = None
        if mask_t.any():
            bbox = bounding_box(mask_t)
            mask_t1 = tracker.track(frames, mask_t, bbox)
            corrs = corr_source.correspondences(int(k), mask_t, mask_t1)
            if len(corrs) >= 3:
                fit = jlinkage(corrs, cfg, rng)
                if fit is not None and fit[1] > cfg.thres_inliers:
                    transform, record.inliers = fit[0], fit[1]
                    record.method = METHOD_CORRESPONDENCE
            if transform is None:
                p_src = masked_cloud(obs_t.depth, cam, mask_t)
                p_tar = masked_cloud(obs_t1.depth, cam, mask_t1)
                if len(p_src) >= 3 and len(p_tar) >= 3:
                    T, err = icp(p_src, p_tar, cfg)
                    record.fit_error = err
                    if err < cfg.thres_icp:
                        transform = T
                        record.method = METHOD_ICP
        if transform is None:
            transform = RigidTransform.identity()
        trajectory[int(k)] = transform
        if diagnostics is not None:
            diagnostics.append(record)
    return trajectory
