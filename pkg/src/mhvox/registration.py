"""Rigid transform estimation from 3D point data.

Three layers: a least-squares minimal solver (SVD-based, proper rotations
only), a robust multi-model consensus fit over noisy correspondences that
clusters points by the Jaccard distance of their hypothesis-preference sets,
and classic point-to-point ICP for the correspondence-free fallback.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import RigidTransform


@dataclass(frozen=True)
class Correspondence:
    """A matched pair of 3D points (meters, world frame)."""

    src: tuple
    dst: tuple

    def __post_init__(self):
        src = tuple(float(c) for c in self.src)
        dst = tuple(float(c) for c in self.dst)
        if len(src) != 3 or len(dst) != 3:
            raise ValueError("points must be 3D")
        if not all(np.isfinite(src + dst)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)


def corr_arrays(pairs):
    """Split a correspondence list into (n, 3) src and dst arrays."""
    src = np.array([p.src for p in pairs], dtype=float).reshape(-1, 3)
    dst = np.array([p.dst for p in pairs], dtype=float).reshape(-1, 3)
    return src, dst


@dataclass
class JLinkageParams:
    hypotheses: int = 500
    inlier_radius: float = 0.005

    def __post_init__(self):
        if self.hypotheses < 1 or not self.inlier_radius > 0:
            raise ValueError("jlinkage parameters must be positive")


@dataclass
class IcpParams:
    max_iterations: int = 50
    convergence_eps: float = 1e-6

    def __post_init__(self):
        if self.max_iterations < 1 or not self.convergence_eps > 0:
            raise ValueError("icp parameters must be positive")


@dataclass
class TrackConfig:
    """Thresholds and sub-algorithm knobs for per-object tracking."""

    thres_inliers: int = 5
    thres_icp: float = 0.001
    jlinkage: JLinkageParams = field(default_factory=JLinkageParams)
    icp: IcpParams = field(default_factory=IcpParams)
    seed: int = 0

    def __post_init__(self):
        if self.thres_inliers < 1 or not self.thres_icp > 0:
            raise ValueError("thresholds must be positive")


def _kabsch_arrays(src, dst):
    cs = src.mean(axis=0)
    cd = dst.mean(axis=0)
    H = (src - cs).T @ (dst - cd)
    U, S, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    return RigidTransform(R, cd - R @ cs)


def kabsch(pairs):
    """Least-squares proper rigid transform aligning src points onto dst.

    Needs at least 3 non-collinear source points; raises ValueError
    otherwise.
    """
    src, dst = corr_arrays(pairs) if pairs and isinstance(pairs[0], Correspondence) \
        else (np.asarray(pairs[0], dtype=float), np.asarray(pairs[1], dtype=float))
    if len(src) < 3:
        raise ValueError("kabsch needs at least 3 point pairs")
    sv = np.linalg.svd(src - src.mean(axis=0), compute_uv=False)
    if sv[1] <= 1e-12 * max(sv[0], 1e-30):
        raise ValueError("source points are collinear")
    return _kabsch_arrays(src, dst)


def _batched_minimal_fits(src, dst, triples):
    """Kabsch on many 3-point subsets at once; returns (R, t, ok) stacks."""
    s = src[triples]                      # (h, 3, 3)
    d = dst[triples]
    cs = s.mean(axis=1, keepdims=True)
    cd = d.mean(axis=1, keepdims=True)
    H = np.einsum("hij,hik->hjk", s - cs, d - cd)
    U, S, Vt = np.linalg.svd(H)
    det = np.linalg.det(np.einsum("hij,hkj->hik", Vt.transpose(0, 2, 1), U))
    fix = np.repeat(np.eye(3)[None], len(triples), axis=0)
    fix[:, 2, 2] = np.sign(det)
    R = np.einsum("hji,hjk,hlk->hil", Vt, fix, U)
    t = cd[:, 0] - np.einsum("hij,hj->hi", R, cs[:, 0])
    ok = S[:, 1] > 1e-12  # drop collinear minimal samples
    return R, t, ok


def jlinkage(corrs, cfg, rng=None):
    """Robust consensus rigid fit over correspondences with outliers.

    Random minimal subsets generate hypothesis transforms; each
    correspondence's preference set is the hypotheses fitting it within the
    inlier radius; clusters merge greedily by smallest Jaccard distance of
    preference sets until all remaining distances are 1.  The largest
    cluster is refit with all its members.

    Returns ``(transform, inlier_count)`` where the count is the number of
    correspondences within the inlier radius of the refit transform, or
    ``None`` when no 3-member consensus exists.
    """
    if len(corrs) < 3:
        return None
    if rng is None:
        rng = np.random.default_rng(0)
    params = cfg.jlinkage
    src, dst = corr_arrays(corrs)
    n = len(src)
    triples = rng.random((params.hypotheses, n)).argsort(axis=1)[:, :3]
    R, t, ok = _batched_minimal_fits(src, dst, triples)
    R, t = R[ok], t[ok]
    if len(R) == 0:
        return None
    moved = np.einsum("hij,nj->hni", R, src) + t[:, None, :]
    residuals = np.linalg.norm(moved - dst[None], axis=2)     # (h, n)
    prefs = (residuals < params.inlier_radius).T.astype(np.float32)  # (n, h)

    members = [[i] for i in range(n)]
    sizes = prefs.sum(axis=1)
    inter = prefs @ prefs.T
    union = sizes[:, None] + sizes[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        dist = np.where(union > 0, 1.0 - inter / union, 1.0)
    np.fill_diagonal(dist, np.inf)
    alive = np.ones(n, dtype=bool)
    while True:
        flat = np.argmin(dist)
        i, j = divmod(flat, dist.shape[1])
        if dist[i, j] >= 1.0:
            break
        members[i].extend(members[j])
        alive[j] = False
        prefs[i] = np.minimum(prefs[i], prefs[j])
        dist[j, :] = np.inf
        dist[:, j] = np.inf
        si = prefs[i].sum()
        row_inter = prefs[alive] @ prefs[i]
        row_sizes = prefs[alive].sum(axis=1)
        row_union = row_sizes + si - row_inter
        with np.errstate(invalid="ignore", divide="ignore"):
            row = np.where(row_union > 0, 1.0 - row_inter / row_union, 1.0)
        dist[alive, i] = row
        dist[i, alive] = row
        dist[i, i] = np.inf

    best = max((i for i in range(n) if alive[i]), key=lambda i: (len(members[i]), -i))
    cluster = sorted(members[best])
    if len(cluster) < 3:
        return None
    try:
        T = kabsch((src[cluster], dst[cluster]))
    except ValueError:
        return None
    resid = np.linalg.norm(T.apply(src) - dst, axis=1)
    return T, int(np.count_nonzero(resid < params.inlier_radius))


def icp(src, dst, cfg):
    """Point-to-point ICP from an identity initialization.

    Alternates nearest-neighbor matching against ``dst`` with least-squares
    realignment until the RMS residual change drops below the convergence
    epsilon or the iteration cap is hit.  Returns the accumulated transform
    and the final RMS nearest-neighbor distance.
    """
    src = np.asarray(src, dtype=float).reshape(-1, 3)
    dst = np.asarray(dst, dtype=float).reshape(-1, 3)
    if len(src) == 0 or len(dst) == 0:
        raise ValueError("icp requires non-empty point clouds")
    params = cfg.icp
    tree = cKDTree(dst)
    T = RigidTransform.identity()
    cur = src
    d, j = tree.query(cur)
    rms = float(np.sqrt(np.mean(d * d)))
    for _ in range(params.max_iterations):
        try:
            step = kabsch((cur, dst[j]))
        except ValueError:
            break
        new_cur = step.apply(cur)
        d, j = tree.query(new_cur)
        new_rms = float(np.sqrt(np.mean(d * d)))
        if new_rms > rms - params.convergence_eps:
            break  # no meaningful improvement; keep the previous alignment
        T = step.compose(T)
        cur = new_cur
        rms = new_rms
    return T, rms
