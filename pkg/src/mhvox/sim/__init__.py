"""Synthetic tabletop world: scenes, rendering, and learned-component stand-ins."""

from .oracles import OracleMaskTracker, SimCorrespondenceSource, synth_correspondences
from .primitives import Box, Cylinder, Sphere
from .render import Observation, render
from .scene import (Action, CorrNoise, MaskNoise, NoiseSpec, SceneObject,
                    SceneSpec, TreeNoise, World, camera_from_dict,
                    default_camera, generate_scene, ground_truth_voxels,
                    load_actions, load_noise_spec, load_scene_spec,
                    object_motion, step_world)
from .trees import synth_tree

__all__ = [
    "Action", "Box", "CorrNoise", "Cylinder", "MaskNoise", "NoiseSpec",
    "Observation", "OracleMaskTracker", "SceneObject", "SceneSpec",
    "SimCorrespondenceSource", "Sphere", "TreeNoise", "World",
    "camera_from_dict", "default_camera", "generate_scene",
    "ground_truth_voxels", "load_actions", "load_noise_spec",
    "load_scene_spec", "object_motion", "render", "step_world",
    "synth_correspondences", "synth_tree",
]
