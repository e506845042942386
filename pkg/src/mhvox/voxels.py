"""Labeled voxel grids and the operations that act on them in place-free style.

A grid cell holds one object label; label 0 is free space.  All types are
immutable after construction and every operation returns a new state, so
shared inputs are safe to use from concurrent callers.
"""

import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

_MAGIC = b"MHVOXST1"
_VERSION = 1

Q_R_FLOOR = 1e-3  # refinement quality never reported as exactly zero


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a dense voxel grid.

    ``dims`` are the cell counts along x, y, z; ``resolution`` is the cell
    edge length in meters; ``origin`` is the world position of the grid's
    minimum corner.
    """

    dims: tuple
    resolution: float
    origin: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        origin = tuple(float(o) for o in self.origin)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise ValueError("dims must be three positive integers")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "resolution", float(self.resolution))

    @property
    def shape(self):
        return self.dims

    @property
    def num_cells(self):
        nx, ny, nz = self.dims
        return nx * ny * nz

    def centers_of(self, indices):
        """World coordinates of the centers of cells given as an (n, 3) index array."""
        idx = np.asarray(indices, dtype=float)
        return np.asarray(self.origin) + (idx + 0.5) * self.resolution

    def all_centers(self):
        """Centers of every cell, shape (num_cells, 3), x-fastest order."""
        nx, ny, nz = self.dims
        ii, jj, kk = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz),
                                 indexing="ij")
        idx = np.stack([ii, jj, kk], axis=-1).reshape(-1, 3, order="C")
        # reorder so that the x index varies fastest
        flat = np.ravel_multi_index((idx[:, 0], idx[:, 1], idx[:, 2]), self.dims,
                                    order="F")
        out = np.empty_like(idx)
        out[flat] = idx
        return self.centers_of(out)

    def world_to_index(self, points):
        """Cell indices containing the given world points (may be out of bounds)."""
        p = np.asarray(points, dtype=float)
        return np.floor((p - np.asarray(self.origin)) / self.resolution).astype(np.int64)

    def in_bounds(self, indices):
        idx = np.asarray(indices)
        return np.all((idx >= 0) & (idx < np.asarray(self.dims)), axis=-1)


class VoxelState:
    """A dense labeled voxel grid: the full segmentation state of a scene.

    ``labels[i, j, k]`` in {0..num_objects}; 0 is free space.
    """

    __slots__ = ("spec", "labels", "num_objects")

    def __init__(self, spec, labels, num_objects=None):
        arr = np.array(labels, dtype=np.uint16)
        if arr.shape != spec.dims:
            raise ValueError(f"labels shape {arr.shape} does not match grid dims {spec.dims}")
        top = int(arr.max(initial=0))
        if num_objects is None:
            num_objects = top
        elif top > num_objects:
            raise ValueError("labels exceed the declared object count")
        arr.flags.writeable = False
        self.spec = spec
        self.labels = arr
        self.num_objects = int(num_objects)

    @classmethod
    def empty(cls, spec):
        return cls(spec, np.zeros(spec.dims, dtype=np.uint16), 0)

    def mask(self, label):
        """Boolean occupancy of one label."""
        return self.labels == label

    @property
    def occupied(self):
        return self.labels != 0

    @property
    def occupied_count(self):
        return int(np.count_nonzero(self.labels))

    def present_labels(self):
        """Sorted nonzero labels that actually occur."""
        u = np.unique(self.labels)
        return u[u > 0].astype(int)

    def with_labels(self, labels, num_objects=None):
        return VoxelState(self.spec, labels, num_objects)

    def __eq__(self, other):
        if not isinstance(other, VoxelState):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash((self.spec, self.labels.tobytes()))


def iou(a, b):
    """Intersection over union of two voxel sets given as boolean arrays.

    Both arrays must come from the same grid.  Two empty sets count as a
    perfect match (1.0): objects absent from both states agree.
    """
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError("voxel sets come from different grids")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def _box_count(arr, window):
    """Sum of ``arr`` over the centered window^3 neighborhood, truncated at borders."""
    out = arr.astype(np.int64)
    w = np.ones(window, dtype=np.int64)
    for axis in range(3):
        out = ndimage.correlate1d(out, w, axis=axis, mode="constant", cval=0)
    return out


def mode_filter(x, window=3, consensus=0.6):
    """Consensus-thresholded mode filter over cubic neighborhoods.

    Each cell takes the most frequent label in its window^3 neighborhood
    (truncated at the grid boundary) iff that label's frequency is at least
    ``consensus`` times the neighborhood size; otherwise it is left alone.
    One simultaneous pass: all reads come from the input grid.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    if not 0.5 < consensus <= 1.0:
        raise ValueError("consensus must be in (0.5, 1]")
    if window == 1:
        return x
    labels = x.labels
    present = np.unique(labels)
    neighborhood = _box_count(np.ones(labels.shape, dtype=np.int64), window)
    counts = np.empty((len(present),) + labels.shape, dtype=np.int64)
    for i, lab in enumerate(present):
        counts[i] = _box_count(labels == lab, window)
    best = counts.argmax(axis=0)  # ties resolve to the lowest label
    best_count = np.take_along_axis(counts, best[None], axis=0)[0]
    replace = best_count >= consensus * neighborhood
    out = np.where(replace, present[best].astype(np.uint16), labels)
    return x.with_labels(out, x.num_objects)


def _move_labels(x, moves):
    """Move several labels rigidly at once, re-rasterizing to the same grid.

    Sources of every moved label are vacated; transformed voxel centers are
    written to their nearest destination cell.  When two moved voxels claim
    one cell the transformed center closest to the cell center wins; moved
    voxels overwrite cells held by static labels; destinations outside the
    grid are dropped.
    """
    spec = x.spec
    out = np.array(x.labels)
    dests = []
    dists = []
    labs = []
    for k, T in sorted(moves.items()):
        src_idx = np.argwhere(x.labels == k)
        if len(src_idx) == 0:
            continue
        out[x.labels == k] = 0
        moved = T.apply(spec.centers_of(src_idx))
        didx = spec.world_to_index(moved)
        keep = spec.in_bounds(didx)
        didx = didx[keep]
        moved = moved[keep]
        dists.append(np.linalg.norm(moved - spec.centers_of(didx), axis=1))
        dests.append(np.ravel_multi_index((didx[:, 0], didx[:, 1], didx[:, 2]),
                                          spec.dims))
        labs.append(np.full(len(didx), k, dtype=np.uint16))
    if dests:
        dest = np.concatenate(dests)
        dist = np.concatenate(dists)
        lab = np.concatenate(labs)
        order = np.argsort(dist, kind="stable")
        dest, lab = dest[order], lab[order]
        winners, first = np.unique(dest, return_index=True)
        out.reshape(-1)[winners] = lab[first]
    return x.with_labels(out, x.num_objects)


def apply_transform(x, k, T):
    """Rigidly move the voxels of object ``k`` through ``T``.

    Free space (label 0) is not an object and cannot be moved.
    """
    if k == 0:
        raise ValueError("label 0 is free space, not a movable object")
    if k > x.num_objects:
        raise ValueError(f"label {k} exceeds the state's object count")
    return _move_labels(x, {k: T})


def apply_trajectory(x, trajectory):
    """Move every labeled object through its transform; labels absent from
    ``trajectory`` stay put."""
    moves = {k: T for k, T in trajectory.items() if not T.is_identity()}
    if not moves:
        return x
    if 0 in moves:
        raise ValueError("label 0 is free space, not a movable object")
    return _move_labels(x, moves)


def relabel_contiguous(x):
    """Renumber present labels to 1..K preserving order; returns (state, mapping)."""
    present = x.present_labels()
    mapping = {int(old): i + 1 for i, old in enumerate(present)}
    lut = np.zeros(int(x.labels.max(initial=0)) + 1, dtype=np.uint16)
    for old, new in mapping.items():
        lut[old] = new
    return x.with_labels(lut[x.labels], len(present)), mapping


def save_voxels(state, path):
    """Write a VoxelState in the run-length-encoded binary grid format.

    Layout (all little-endian): 16-byte header (8-byte magic, u32 version,
    u32 reserved); 3x u64 dims; f64 resolution; 3x f64 origin; then (count:
    u32, label: u16) runs over cells in x-fastest order.
    """
    flat = state.labels.reshape(-1, order="F")
    if flat.size:
        boundaries = np.flatnonzero(np.diff(flat)) + 1
        starts = np.concatenate([[0], boundaries])
        ends = np.concatenate([boundaries, [flat.size]])
        runs = np.empty(len(starts), dtype=np.dtype([("n", "<u4"), ("l", "<u2")]))
        runs["n"] = ends - starts
        runs["l"] = flat[starts]
    else:
        runs = np.empty(0, dtype=np.dtype([("n", "<u4"), ("l", "<u2")]))
    spec = state.spec
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", _VERSION, 0))
        f.write(struct.pack("<3Q", *spec.dims))
        f.write(struct.pack("<d", spec.resolution))
        f.write(struct.pack("<3d", *spec.origin))
        f.write(runs.tobytes())


def load_voxels(path):
    """Read a VoxelState written by :func:`save_voxels`."""
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != _MAGIC:
            raise ValueError(f"not a voxel state file (bad magic {magic!r})")
        version, _ = struct.unpack("<II", f.read(8))
        if version != _VERSION:
            raise ValueError(f"unsupported voxel state version {version}")
        dims = struct.unpack("<3Q", f.read(24))
        (resolution,) = struct.unpack("<d", f.read(8))
        origin = struct.unpack("<3d", f.read(24))
        payload = f.read()
    runs = np.frombuffer(payload, dtype=np.dtype([("n", "<u4"), ("l", "<u2")]))
    flat = np.repeat(runs["l"], runs["n"])
    spec = GridSpec(dims, resolution, origin)
    if flat.size != spec.num_cells:
        raise ValueError("run lengths do not cover the grid")
    labels = flat.reshape(spec.dims, order="F")
    return VoxelState(spec, labels)
