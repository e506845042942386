"""Lift 2D segmentation samples into labeled 3D voxel states.

Each segment's depth pixels back-project to a partial surface; a pluggable
completion method estimates the hidden volume behind it.  The reference
method extrudes the observed surface away from the camera down to the
support plane, capped by the segment's own extent — a cheap tabletop prior
standing in for learned shape completion behind the same interface.
"""

import numpy as np
from scipy.spatial import cKDTree

from .voxels import VoxelState


def extrusion_complete(surface_points, cam, spec):
    """Reference completion: extrude surface voxels away from the camera.

    Each voxelized surface point is swept along its viewing ray until it
    would pass below the support plane z=0 or exceed the point set's
    bounding-box diagonal, whichever comes first.  Returns an (n, 3) array
    of unique in-bounds voxel indices.
    """
    pts = np.asarray(surface_points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise ValueError("extrusion needs at least one surface point")
    pts = pts.copy()
    pts[:, 2] = np.maximum(pts[:, 2], 0.0)  # clamp below-plane returns to the plane
    diag = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))

    dirs = pts - cam.center_world
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    step = spec.resolution * 0.5
    n_steps = int(np.floor(diag / step)) + 1
    offsets = np.arange(n_steps) * step           # 0 keeps the surface voxel itself
    swept = pts[None, :, :] + offsets[:, None, None] * dirs[None, :, :]
    swept = swept.reshape(-1, 3)
    swept = swept[swept[:, 2] >= 0.0]
    idx = spec.world_to_index(swept)
    idx = idx[spec.in_bounds(idx)]
    if len(idx) == 0:
        return idx.reshape(0, 3)
    return np.unique(idx, axis=0)


def lift(sample, depth, cam, spec, method=extrusion_complete, skipped=None):
    """Turn one weighted 2D sample into a labeled voxel state.

    Every nonzero segment's valid depth pixels are back-projected and
    completed; voxels claimed by several segments go to the segment with the
    nearest observed surface.  Completed volume that contradicts the
    observed free space is discarded so completion never undoes visibility.
    Segments without any depth return are skipped (ids appended to
    ``skipped`` when given).
    """
    seg = sample.segmentation
    if (seg.height, seg.width) != (depth.height, depth.width):
        raise ValueError("segmentation and depth dimensions differ")
    labels = np.zeros(spec.dims, dtype=np.uint16)
    owner_dist = np.full(spec.dims, np.inf)
    for k in seg.present_labels():
        sel = seg.mask(k) & depth.valid
        vs, us = np.nonzero(sel)
        if len(us) == 0:
            if skipped is not None:
                skipped.append(int(k))
            continue
        surface = cam.backproject(us, vs, depth.depth[vs, us])
        voxels = method(surface, cam, spec)
        if len(voxels) == 0:
            continue
        centers = spec.centers_of(voxels)
        dist, _ = cKDTree(surface).query(centers)
        i, j, l = voxels[:, 0], voxels[:, 1], voxels[:, 2]
        win = dist < owner_dist[i, j, l]
        labels[i[win], j[win], l[win]] = k
        owner_dist[i[win], j[win], l[win]] = dist[win]
    state = VoxelState(spec, labels)
    return _clear_observed_free(state, depth, cam)


def _clear_observed_free(state, depth, cam):
    """Drop completed voxels that sit strictly inside the observed free volume."""
    from .raycast import free_space_refine

    refined, _ = free_space_refine(state, depth, cam)
    return refined
