"""Segmentation similarity: symmetric size-weighted coverage.

The score of one state against another sums, over every label of the first
(including free space), the best achievable IOU against any label of the
second, weighted by segment size and normalized by the cell count.  The
symmetric mean of the two directions is 1 exactly when the two label
partitions agree up to relabeling.
"""

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class QualityReport:
    """Symmetric coverage ``q`` with its two directed terms and match tables.

    ``matches_ij`` maps each label of the first state to its best-IOU label
    in the second; ``matches_ji`` is the reverse direction.
    """

    q: float
    c_ij: float
    c_ji: float
    matches_ij: dict = field(default_factory=dict)
    matches_ji: dict = field(default_factory=dict)


def _confusion(a, b):
    """Joint label counts plus the sorted label values of both arrays."""
    la, ia = np.unique(a, return_inverse=True)
    lb, ib = np.unique(b, return_inverse=True)
    joint = np.bincount(ia * len(lb) + ib, minlength=len(la) * len(lb))
    return joint.reshape(len(la), len(lb)), la, lb


def _directed_coverage(counts, la, lb):
    """Coverage of rows against columns; returns (C, best-match table)."""
    total = counts.sum()
    row = counts.sum(axis=1)
    col = counts.sum(axis=0)
    union = row[:, None] + col[None, :] - counts
    with np.errstate(invalid="ignore"):
        ious = np.where(union > 0, counts / union, 0.0)
    best = ious.argmax(axis=1)
    best_iou = ious[np.arange(len(la)), best]
    # fsum makes the result exact and independent of label numbering
    c = math.fsum(float(row[m]) * float(best_iou[m]) for m in range(len(la))) / total
    table = {int(la[m]): (int(lb[best[m]]), float(best_iou[m])) for m in range(len(la))}
    return c, table


def coverage_arrays(a, b):
    """Directed coverage of flat/2D/3D label array ``a`` against ``b``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("label arrays have different shapes")
    counts, la, lb = _confusion(a.reshape(-1), b.reshape(-1))
    c, _ = _directed_coverage(counts, la, lb)
    return c


def quality_arrays(a, b):
    """Symmetric quality of two label arrays of identical shape."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("label arrays have different shapes")
    counts, la, lb = _confusion(a.reshape(-1), b.reshape(-1))
    c_ij, t_ij = _directed_coverage(counts, la, lb)
    c_ji, t_ji = _directed_coverage(counts.T, lb, la)
    return QualityReport(0.5 * c_ij + 0.5 * c_ji, c_ij, c_ji, t_ij, t_ji)


def coverage(x_i, x_j):
    """Directed coverage between two voxel states on the same grid."""
    if x_i.spec != x_j.spec:
        raise ValueError("voxel states live on different grids")
    return coverage_arrays(x_i.labels, x_j.labels)


def quality(x_i, x_j):
    """Symmetric match quality of two voxel states on the same grid."""
    if x_i.spec != x_j.spec:
        raise ValueError("voxel states live on different grids")
    return quality_arrays(x_i.labels, x_j.labels)


def quality_images(s_i, s_j):
    """2D overload of :func:`quality` over per-pixel label images."""
    if (s_i.width, s_i.height) != (s_j.width, s_j.height):
        raise ValueError("segmentation images have different dimensions")
    return quality_arrays(s_i.labels, s_j.labels)
