"""Per-pixel observation types: label images and depth images.

Binary masks are passed around as plain boolean (height, width) arrays.
"""

import numpy as np

NO_RETURN = np.inf


class SegmentationImage:
    """Per-pixel object labels; 0 is background/free space."""

    __slots__ = ("labels",)

    def __init__(self, labels):
        arr = np.array(labels, dtype=np.int32)
        if arr.ndim != 2:
            raise ValueError("labels must be a 2D array")
        if arr.min(initial=0) < 0:
            raise ValueError("labels must be non-negative")
        arr.flags.writeable = False
        self.labels = arr

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def width(self):
        return self.labels.shape[1]

    def present_labels(self):
        """Sorted nonzero labels that appear in the image."""
        u = np.unique(self.labels)
        return u[u > 0]

    def mask(self, label):
        return self.labels == label


class DepthImage:
    """Per-pixel range in meters (distance from the camera center).

    Pixels with no return hold ``NO_RETURN`` (infinity).
    """

    __slots__ = ("depth",)

    def __init__(self, depth):
        arr = np.array(depth, dtype=float)
        if arr.ndim != 2:
            raise ValueError("depth must be a 2D array")
        finite = np.isfinite(arr)
        if np.any(arr[finite] <= 0):
            raise ValueError("finite depths must be positive")
        arr.flags.writeable = False
        self.depth = arr

    @property
    def height(self):
        return self.depth.shape[0]

    @property
    def width(self):
        return self.depth.shape[1]

    @property
    def valid(self):
        """Boolean mask of pixels with an actual return."""
        return np.isfinite(self.depth)
