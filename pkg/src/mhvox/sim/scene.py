"""Synthetic tabletop worlds: generation, scripted motion, and ground truth.

A world is a list of labeled primitives resting on the z=0 support plane
inside a rectangular workspace.  Everything is kinematic — actions move one
object along an interpolated rigid motion with no physics.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from ..geometry import CameraModel, RigidTransform, rot_z
from ..voxels import VoxelState
from .primitives import Box, Cylinder, Sphere

_PLACEMENT_BUDGET = 200


@dataclass
class SceneSpec:
    """Recipe for a random tabletop scene.

    ``size_range`` is the full characteristic size (meters) objects are
    drawn from; ``min_gap`` is the minimum footprint gap between objects
    (<= 0 allows contact).  ``objects`` may list explicit object dicts
    (shape, size, position, yaw) to bypass random placement.
    """

    workspace: tuple = (1.0, 1.0, 0.5)
    count_range: tuple = (2, 20)
    shapes: tuple = ("box", "cylinder", "sphere")
    size_range: tuple = (0.04, 0.12)
    min_gap: float = 0.01
    seed: int = 0
    objects: list = None
    camera: dict = None

    def __post_init__(self):
        if self.count_range[0] < 1 or self.count_range[1] < self.count_range[0]:
            raise ValueError("invalid object count range")
        if self.size_range[0] <= 0 or self.size_range[1] < self.size_range[0]:
            raise ValueError("invalid size range")


@dataclass
class SceneObject:
    label: int
    primitive: object
    pose: RigidTransform     # object frame -> world

    def moved(self, pose):
        return SceneObject(self.label, self.primitive, pose)


@dataclass
class World:
    """Ground-truth container: labeled primitives over the z=0 plane."""

    objects: list
    workspace: tuple = (1.0, 1.0, 0.5)

    def labels(self):
        return [o.label for o in self.objects]

    def object(self, label):
        for o in self.objects:
            if o.label == label:
                return o
        raise KeyError(label)


@dataclass
class Action:
    """Scripted rigid motion of one object, linearly interpolated over frames."""

    target: int
    translation: tuple = (0.0, 0.0, 0.0)
    yaw: float = 0.0
    frames: int = 5

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("frames must be >= 1")


@dataclass
class MaskNoise:
    morph_radius: int = 0
    dropout: float = 0.0
    mode: str = "random"      # random | dilate | erode


@dataclass
class TreeNoise:
    split: float = 0.0        # probability of a spurious leaf split
    wrong_merge: float = 0.0  # probability a merge step picks a cross-label pair


@dataclass
class CorrNoise:
    outlier_fraction: float = 0.0
    sigma: float = 0.0
    max_count: int = 120


@dataclass
class NoiseSpec:
    """All corruption knobs for the simulated sensing stack."""

    depth_sigma: float = 0.0
    tree: TreeNoise = field(default_factory=TreeNoise)
    mask: MaskNoise = field(default_factory=MaskNoise)
    corr: CorrNoise = field(default_factory=CorrNoise)

    @classmethod
    def from_dict(cls, d):
        return cls(depth_sigma=d.get("depth_sigma", 0.0),
                   tree=TreeNoise(**d.get("tree", {})),
                   mask=MaskNoise(**d.get("mask", {})),
                   corr=CorrNoise(**d.get("corr", {})))


def _make_primitive(shape, size, rng=None, jitter=True):
    """Build a primitive of characteristic full size ``size``."""
    half = size / 2.0
    if shape == "box":
        if jitter and rng is not None:
            h = half * rng.uniform(0.6, 1.0, size=3)
        else:
            h = np.full(3, half)
        return Box(h)
    if shape == "sphere":
        return Sphere(half)
    if shape == "cylinder":
        return Cylinder(half * 0.7, half)
    raise ValueError(f"unknown primitive shape {shape!r}")


def generate_scene(spec):
    """Create a world from a scene spec; deterministic under its seed.

    Random placement samples yaw-rotated primitives resting on the plane and
    rejects footprints closer than ``min_gap`` (conservative bounding-circle
    test, so objects never interpenetrate for gaps >= 0).  Raises when the
    retry budget runs out.
    """
    rng = np.random.default_rng(spec.seed)
    wx, wy, _ = spec.workspace
    if spec.objects is not None:
        objs = []
        for i, od in enumerate(spec.objects):
            prim = _make_primitive(od["shape"], float(od["size"]), jitter=False)
            x, y = od["position"][:2]
            z = od["position"][2] if len(od["position"]) > 2 else prim.rest_height
            pose = RigidTransform(rot_z(od.get("yaw", 0.0)), (x, y, z))
            objs.append(SceneObject(i + 1, prim, pose))
        return World(objs, spec.workspace)

    count = int(rng.integers(spec.count_range[0], spec.count_range[1] + 1))
    placed = []
    world_objs = []
    for label in range(1, count + 1):
        shape = spec.shapes[rng.integers(len(spec.shapes))]
        size = rng.uniform(*spec.size_range)
        prim = _make_primitive(shape, size, rng)
        r = prim.footprint_radius
        for _ in range(_PLACEMENT_BUDGET):
            x = rng.uniform(r, wx - r)
            y = rng.uniform(r, wy - r)
            if all(np.hypot(x - ox, y - oy) >= r + orad + spec.min_gap
                   for ox, oy, orad in placed):
                break
        else:
            raise RuntimeError(f"could not place object {label} within the retry budget")
        placed.append((x, y, r))
        yaw = rng.uniform(0, 2 * np.pi) if shape != "sphere" else 0.0
        pose = RigidTransform(rot_z(yaw), (x, y, prim.rest_height))
        world_objs.append(SceneObject(label, prim, pose))
    return World(world_objs, spec.workspace)


def step_world(world, action):
    """Apply one action; returns the per-frame world sequence (final last).

    The target's pose composes with the linearly interpolated motion
    (rotation about the object's starting center, then translation); other
    objects stay put.  Raises when the motion leaves the workspace.
    """
    target = world.object(action.target)
    c0 = target.pose.translation
    wx, wy, wz = world.workspace
    seq = []
    for f in range(1, action.frames + 1):
        a = f / action.frames
        motion = RigidTransform(np.eye(3), np.asarray(action.translation) * a).compose(
            RigidTransform.from_rotation_about(rot_z(action.yaw * a), c0))
        pose = motion.compose(target.pose)
        p = pose.translation
        if not (0 <= p[0] <= wx and 0 <= p[1] <= wy and 0 <= p[2] <= wz):
            raise ValueError(f"action moves object {action.target} outside the workspace")
        objs = [o.moved(pose) if o.label == action.target else o for o in world.objects]
        seq.append(World(objs, world.workspace))
    return seq


def object_motion(world_before, world_after, label):
    """True rigid motion of one object between two worlds."""
    a = world_before.object(label).pose
    b = world_after.object(label).pose
    return b.compose(a.inverse())


def ground_truth_voxels(world, spec):
    """Voxelize the world: a cell takes the lowest label containing its center."""
    centers = spec.all_centers()
    flat = np.zeros(len(centers), dtype=np.uint16)
    for obj in sorted(world.objects, key=lambda o: o.label):
        local = obj.pose.inverse().apply(centers)
        inside = obj.primitive.contains(local) & (flat == 0)
        flat[inside] = obj.label
    return VoxelState(spec, flat.reshape(spec.dims, order="F"))


def default_camera(workspace, width=96, height=96):
    """Oblique view covering the workspace from the -y side."""
    wx, wy, wz = workspace
    position = (wx / 2.0, -0.65 * wy, 0.85 * max(wz, 0.4) + 0.25)
    target = (wx / 2.0, wy / 2.0, 0.05)
    return CameraModel.look_at(position, target, width, height, fov_deg=62.0)


def camera_from_dict(d, workspace):
    if d is None:
        return default_camera(workspace)
    return CameraModel.look_at(d["position"], d["look_at"],
                               d.get("width", 96), d.get("height", 96),
                               d.get("fov_deg", 62.0))


# -- JSON schemas --------------------------------------------------------------

def load_scene_spec(path):
    """Read a scene spec JSON file (schema "scene/1")."""
    with open(path) as f:
        d = json.load(f)
    if d.get("schema") != "scene/1":
        raise ValueError("scene spec must declare schema 'scene/1'")
    return SceneSpec(
        workspace=tuple(d.get("workspace", (1.0, 1.0, 0.5))),
        count_range=tuple(d.get("object_count", (2, 20))),
        shapes=tuple(d.get("shapes", ("box", "cylinder", "sphere"))),
        size_range=tuple(d.get("size_range", (0.04, 0.12))),
        min_gap=d.get("min_gap", 0.01),
        seed=d.get("seed", 0),
        objects=d.get("objects"),
        camera=d.get("camera"),
    )


def load_actions(path):
    """Read an action script JSON file (schema "actions/1")."""
    with open(path) as f:
        d = json.load(f)
    if d.get("schema") != "actions/1":
        raise ValueError("action script must declare schema 'actions/1'")
    return [Action(target=a["target"],
                   translation=tuple(a.get("translation", (0, 0, 0))),
                   yaw=a.get("yaw", 0.0),
                   frames=a.get("frames", 5))
            for a in d["actions"]]


def load_noise_spec(path_or_dict):
    """Read a noise spec from a JSON file path or an inline dict (schema "noise/1")."""
    if isinstance(path_or_dict, dict):
        d = dict(path_or_dict)
    else:
        with open(path_or_dict) as f:
            d = json.load(f)
    if d.pop("schema", "noise/1") != "noise/1":
        raise ValueError("noise spec must declare schema 'noise/1'")
    return NoiseSpec.from_dict(d)
