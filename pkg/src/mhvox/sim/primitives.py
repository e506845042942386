"""Analytic solid primitives: containment, ray intersection, signed distance.

All queries run in the primitive's object frame; poses live on the scene
objects.  Analytic geometry keeps ground truth exact — no meshes, no
tessellation error.
"""

import numpy as np


class Box:
    """Axis-aligned box in its object frame, given by half extents."""

    def __init__(self, half_extents):
        h = np.asarray(half_extents, dtype=float).reshape(3)
        if np.any(h <= 0):
            raise ValueError("half extents must be positive")
        self.half = h

    def contains(self, points):
        p = np.atleast_2d(points)
        return np.all(np.abs(p) <= self.half, axis=1)

    def intersect(self, origins, dirs):
        """Smallest positive ray parameter per ray, inf for misses (slab test)."""
        o = np.atleast_2d(origins)
        d = np.atleast_2d(dirs)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-self.half - o) / d
            t2 = (self.half - o) / d
        t1 = np.where(np.isnan(t1), -np.inf, t1)
        t2 = np.where(np.isnan(t2), np.inf, t2)
        near = np.minimum(t1, t2).max(axis=1)
        far = np.maximum(t1, t2).min(axis=1)
        # rays with origin off-slab and parallel direction never hit
        parallel_miss = np.any((d == 0) & (np.abs(o) > self.half), axis=1)
        t = np.where((near <= far) & (far > 0) & ~parallel_miss,
                     np.where(near > 0, near, far), np.inf)
        return t

    def sdf(self, points):
        p = np.abs(np.atleast_2d(points)) - self.half
        outside = np.linalg.norm(np.maximum(p, 0), axis=1)
        inside = np.minimum(p.max(axis=1), 0.0)
        return outside + inside

    @property
    def footprint_radius(self):
        return float(np.hypot(self.half[0], self.half[1]))

    @property
    def rest_height(self):
        return float(self.half[2])


class Sphere:
    def __init__(self, radius):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)

    def contains(self, points):
        p = np.atleast_2d(points)
        return np.einsum("ij,ij->i", p, p) <= self.radius**2

    def intersect(self, origins, dirs):
        o = np.atleast_2d(origins)
        d = np.atleast_2d(dirs)
        b = np.einsum("ij,ij->i", o, d)
        c = np.einsum("ij,ij->i", o, o) - self.radius**2
        disc = b * b - c
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t0 = -b - sq
        t1 = -b + sq
        t = np.where(t0 > 0, t0, t1)
        return np.where(ok & (t > 0), t, np.inf)

    def sdf(self, points):
        return np.linalg.norm(np.atleast_2d(points), axis=1) - self.radius

    @property
    def footprint_radius(self):
        return self.radius

    @property
    def rest_height(self):
        return self.radius


class Cylinder:
    """Upright cylinder along the object-frame z axis."""

    def __init__(self, radius, half_height):
        if radius <= 0 or half_height <= 0:
            raise ValueError("cylinder dimensions must be positive")
        self.radius = float(radius)
        self.half_height = float(half_height)

    def contains(self, points):
        p = np.atleast_2d(points)
        radial = p[:, 0] ** 2 + p[:, 1] ** 2 <= self.radius**2
        return radial & (np.abs(p[:, 2]) <= self.half_height)

    def intersect(self, origins, dirs):
        o = np.atleast_2d(origins)
        d = np.atleast_2d(dirs)
        best = np.full(len(o), np.inf)
        # lateral surface: quadratic in the xy plane
        a = d[:, 0] ** 2 + d[:, 1] ** 2
        b = o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1]
        c = o[:, 0] ** 2 + o[:, 1] ** 2 - self.radius**2
        quad = a > 0
        disc = b * b - a * c
        ok = quad & (disc >= 0)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            for t in ((-b - sq) / a, (-b + sq) / a):
                z = o[:, 2] + t * d[:, 2]
                hit = ok & (t > 0) & (np.abs(z) <= self.half_height)
                best = np.where(hit, np.minimum(best, t), best)
        # caps
        for zc in (-self.half_height, self.half_height):
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (zc - o[:, 2]) / d[:, 2]
            x = o[:, 0] + t * d[:, 0]
            y = o[:, 1] + t * d[:, 1]
            hit = (d[:, 2] != 0) & (t > 0) & (x * x + y * y <= self.radius**2)
            best = np.where(hit, np.minimum(best, t), best)
        return best

    def sdf(self, points):
        p = np.atleast_2d(points)
        dr = np.hypot(p[:, 0], p[:, 1]) - self.radius
        dz = np.abs(p[:, 2]) - self.half_height
        outside = np.hypot(np.maximum(dr, 0), np.maximum(dz, 0))
        inside = np.minimum(np.maximum(dr, dz), 0.0)
        return outside + inside

    @property
    def footprint_radius(self):
        return self.radius

    @property
    def rest_height(self):
        return self.half_height
