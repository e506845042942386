"""Multi-hypothesis volumetric scene segmentation.

Sample diverse segmentations of an observed scene from a region-merge
hierarchy, lift them into labeled voxel grids, track per-object rigid
motion across observations, and fuse tracked predictions with fresh samples
into a weighted hypothesis population — all against a built-in synthetic
tabletop simulator that supplies ground truth.
"""

from .completion import extrusion_complete, lift
from .fusion import (ConflictGraph, Hypothesis, HypothesisSet, ObjectNode,
                     build_conflict_graph, connected_components,
                     fuse_populations, hypothesis_weight, resample,
                     sample_merges)
from .geometry import CameraModel, RigidTransform
from .images import NO_RETURN, DepthImage, SegmentationImage
from .metrics import QualityReport, coverage, quality, quality_images
from .pipeline import (FusionConfig, PipelineError, RunConfig, RunReport,
                       export_report, run_baseline, run_baselines,
                       run_pipeline)
from .raycast import free_space_refine, project
from .registration import (Correspondence, IcpParams, JLinkageParams,
                           TrackConfig, icp, jlinkage, kabsch)
from .sampler import (SamplerConfig, WeightedSample, mh_step, posterior,
                      sample_segmentations)
from .segtree import (DOWN, UP, AdditiveValue, RegionCoherenceValue, SegTree,
                      ValueFunction, apply_cut, cut_value, move_node,
                      optimal_cut, tree_from_text, tree_to_text)
from .tracking import (CorrespondenceSource, MaskTracker, TrackRecord,
                       track_objects)
from .voxels import (GridSpec, VoxelState, apply_transform, apply_trajectory,
                     iou, load_voxels, mode_filter, relabel_contiguous,
                     save_voxels)

__version__ = "0.1.0"
