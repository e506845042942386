"""Ray casting between voxel grids and images.

``project`` renders a labeled grid into a per-pixel label image by exact
cell-by-cell digital differential traversal (no thin object is ever skipped);
``free_space_refine`` clears voxels contradicted by an observed depth image.
"""

import numpy as np

from .images import SegmentationImage
from .voxels import Q_R_FLOOR


def project(x, cam):
    """Project a voxel state to a label image by per-pixel ray casting.

    Each pixel gets the label of the first occupied cell its ray crosses,
    front to back, or 0 if the ray leaves the grid without a hit.
    """
    spec = x.spec
    labels = x.labels
    dims = np.asarray(spec.dims)
    origin = np.asarray(spec.origin)
    res = spec.resolution

    dirs = cam.pixel_rays().reshape(-1, 3)
    C = cam.center_world
    n = len(dirs)
    out = np.zeros(n, dtype=np.uint16)

    # clip rays against the grid box
    lo = origin
    hi = origin + dims * res
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - C) / dirs
        t2 = (hi - C) / dirs
    t1 = np.where(np.isnan(t1), -np.inf, t1)
    t2 = np.where(np.isnan(t2), np.inf, t2)
    t_enter = np.minimum(t1, t2).max(axis=1)
    t_exit = np.maximum(t1, t2).min(axis=1)
    t0 = np.maximum(t_enter, 0.0)
    active = t_exit > t0

    eps = 1e-9 * res
    p0 = C + dirs * (t0 + eps)[:, None]
    cell = np.floor((p0 - origin) / res).astype(np.int64)
    cell = np.clip(cell, 0, dims - 1)

    step = np.sign(dirs).astype(np.int64)
    with np.errstate(divide="ignore"):
        t_delta = np.where(dirs != 0.0, res / np.abs(dirs), np.inf)
        next_boundary = origin + (cell + (step > 0)) * res
        t_max = np.where(dirs != 0.0, (next_boundary - C) / dirs, np.inf)

    idx = np.arange(n)
    max_steps = int(dims.sum()) + 4
    for _ in range(max_steps):
        if not active.any():
            break
        act = idx[active]
        lab = labels[cell[act, 0], cell[act, 1], cell[act, 2]]
        hit = lab != 0
        out[act[hit]] = lab[hit]
        active[act[hit]] = False
        act = act[~hit]
        if len(act) == 0:
            continue
        axis = np.argmin(t_max[act], axis=1)
        t_cur = t_max[act, axis]
        cell[act, axis] += step[act, axis]
        t_max[act, axis] += t_delta[act, axis]
        gone = ((cell[act, axis] < 0) | (cell[act, axis] >= dims[axis])
                | (t_cur > t_exit[act]))
        active[act[gone]] = False
    return SegmentationImage(out.reshape(cam.height, cam.width))


def free_space_refine(x, d, cam):
    """Clear voxels observed to be in free space; report the surviving fraction.

    A voxel is cleared when its center projects to a pixel with a depth
    return and sits strictly between the camera and the measured surface
    with at least one voxel of margin to spare.  Returns the refined state
    and q_r = occupied_after / occupied_before (1.0 when nothing was
    occupied, floored at a small epsilon so downstream weight products never
    collapse to zero).
    """
    occ_idx = np.argwhere(x.labels != 0)
    before = len(occ_idx)
    if before == 0:
        return x, 1.0
    centers = x.spec.centers_of(occ_idx)
    u, v, dist, in_front = cam.project_points(centers)
    px = np.floor(u).astype(np.int64)
    py = np.floor(v).astype(np.int64)
    in_image = (in_front & (px >= 0) & (px < cam.width)
                & (py >= 0) & (py < cam.height))
    measured = np.full(before, np.inf)
    measured[in_image] = d.depth[py[in_image], px[in_image]]
    clear = in_image & np.isfinite(measured) & (dist < measured - x.spec.resolution)
    if not clear.any():
        return x, 1.0
    labels = np.array(x.labels)
    kill = occ_idx[clear]
    labels[kill[:, 0], kill[:, 1], kill[:, 2]] = 0
    after = before - int(clear.sum())
    q_r = max(after / before, Q_R_FLOOR)
    return x.with_labels(labels, x.num_objects), q_r
