"""End-to-end driver: observe, sample, track, fuse, score, repeat.

One run consumes a scene spec, an action script, and a grid, then plays the
action sequence while maintaining the weighted hypothesis population.  Two
baselines share the machinery: per-frame resampling with no memory
("single-frame") and pure propagation with no new samples ("tracking-only").
All randomness flows from the run seed through named substreams so stages
stay reproducible independently of one another.
"""

import contextlib
import csv
import dataclasses
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .fusion import Hypothesis, HypothesisSet, fuse_populations, resample
from .metrics import quality
from .raycast import free_space_refine
from .registration import IcpParams, JLinkageParams, TrackConfig
from .rng import child_seed, substream
from .sampler import SamplerConfig, sample_segmentations
from .segtree import RegionCoherenceValue
from .sim import (OracleMaskTracker, SimCorrespondenceSource,
                  camera_from_dict, generate_scene, ground_truth_voxels,
                  load_actions, load_noise_spec, load_scene_spec, render,
                  step_world, synth_tree)
from .sim.trees import DEFAULT_CELL
from .tracking import track_objects
from .voxels import GridSpec, apply_trajectory, save_voxels
from .completion import lift

METHOD_MST = "mst"
METHOD_SINGLE_FRAME = "single-frame"
METHOD_TRACKING_ONLY = "tracking-only"

CSV_COLUMNS = ["run_id", "method", "seed", "t", "hyp_id", "weight", "q", "C_ij", "C_ji"]


class PipelineError(RuntimeError):
    """A stage-tagged pipeline failure."""

    def __init__(self, stage, message):
        super().__init__(f"[stage:{stage}] {message}")
        self.stage = stage


@contextlib.contextmanager
def _stage(name):
    try:
        yield
    except PipelineError:
        raise
    except Exception as e:
        raise PipelineError(name, str(e)) from e


@dataclass
class FusionConfig:
    eta: int = 3
    lam: float = 3.0
    mode_window: int = 3
    mode_consensus: float = 0.6

    def __post_init__(self):
        if self.eta < 1:
            raise ValueError("eta must be >= 1")


@dataclass
class RunConfig:
    """Everything one run needs; loadable from JSON with field overrides."""

    scene: str
    actions: str
    grid: GridSpec
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    tracking: TrackConfig = field(default_factory=TrackConfig)
    noise: object = None              # NoiseSpec
    segment_penalty: float = 10.0
    superpixel_cell: int = DEFAULT_CELL
    out_dir: str = "runs/out"
    seed: int = 0

    @classmethod
    def from_json(cls, path, overrides=()):
        with open(path) as f:
            d = json.load(f)
        if d.get("schema") != "run/1":
            raise ValueError("run config must declare schema 'run/1'")
        d.pop("schema")
        for key, value in overrides:
            _apply_override(d, key, value)
        base = os.path.dirname(os.path.abspath(path))

        def resolve(p):
            return p if os.path.isabs(p) else os.path.join(base, p)

        grid = d["grid"]
        tr = d.get("tracking", {})
        return cls(
            scene=resolve(d["scene"]),
            actions=resolve(d["actions"]),
            grid=GridSpec(tuple(grid["dims"]), grid["resolution"],
                          tuple(grid.get("origin", (0, 0, 0)))),
            sampler=SamplerConfig(**d.get("sampler", {})),
            fusion=FusionConfig(**d.get("fusion", {})),
            tracking=TrackConfig(
                thres_inliers=tr.get("thres_inliers", 5),
                thres_icp=tr.get("thres_icp", 0.001),
                jlinkage=JLinkageParams(**tr.get("jlinkage", {})),
                icp=IcpParams(**tr.get("icp", {})),
                seed=tr.get("seed", 0)),
            noise=load_noise_spec(d["noise"]) if isinstance(d.get("noise"), dict)
            else (load_noise_spec(resolve(d["noise"])) if d.get("noise") else None),
            segment_penalty=d.get("segment_penalty", 10.0),
            superpixel_cell=d.get("superpixel_cell", DEFAULT_CELL),
            out_dir=d.get("out_dir", "runs/out"),
            seed=d.get("seed", 0),
        )

    def validate(self):
        """Return a list of problems; empty when the config is runnable."""
        problems = []
        for name, path in (("scene", self.scene), ("actions", self.actions)):
            if not os.path.exists(path):
                problems.append(f"{name} file not found: {path}")
            else:
                try:
                    (load_scene_spec if name == "scene" else load_actions)(path)
                except Exception as e:
                    problems.append(f"bad {name} file: {e}")
        if self.sampler.n < 1:
            problems.append("sampler.n must be >= 1")
        return problems


def _apply_override(d, dotted, value):
    keys = dotted.split(".")
    cur = d
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
    cur[keys[-1]] = value


@dataclass
class StepSummary:
    t: int
    maxw_q: float
    best_q: float
    mean_q: float


@dataclass
class RunReport:
    run_id: str
    method: str
    seed: int
    steps: list
    out_dir: str

    def final(self):
        return self.steps[-1]


class _RunWriter:
    """Single writer for all run outputs; flushes per timestep."""

    def __init__(self, out_dir, run_id, method, seed):
        self.out_dir = out_dir
        self.run_id = run_id
        self.method = method
        self.seed = seed
        os.makedirs(out_dir, exist_ok=True)
        self._csv = open(os.path.join(out_dir, "metrics.csv"), "w", newline="")
        self._writer = csv.writer(self._csv)
        self._writer.writerow(CSV_COLUMNS)
        self._diag = open(os.path.join(out_dir, "diagnostics.jsonl"), "w")

    def metrics(self, t, hypotheses, reports):
        for h, rep in zip(hypotheses, reports):
            self._writer.writerow([self.run_id, self.method, self.seed, t,
                                   h.hyp_id, repr(float(h.weight)),
                                   repr(rep.q), repr(rep.c_ij), repr(rep.c_ji)])
        self._csv.flush()

    def diagnostics(self, t, hyp_id, records):
        for r in records:
            fit = None if np.isnan(r.fit_error) else r.fit_error
            self._diag.write(json.dumps({"t": t, "hypothesis": hyp_id,
                                         "label": r.label, "method": r.method,
                                         "inliers": r.inliers,
                                         "fit_error": fit}) + "\n")
        self._diag.flush()

    def dump(self, t, hypotheses, skipped):
        tdir = os.path.join(self.out_dir, f"t{t:02d}")
        os.makedirs(tdir, exist_ok=True)
        manifest = {"schema": "hypotheses/1", "t": t, "hypotheses": []}
        for h in hypotheses:
            fname = f"hyp{h.hyp_id}.vox"
            save_voxels(h.state, os.path.join(tdir, fname))
            manifest["hypotheses"].append({
                "id": h.hyp_id, "file": fname, "weight": h.weight,
                "lineage": {"parent": h.lineage[0], "sample": h.lineage[1],
                            "t": h.lineage[2]},
                "refine_quality": h.refine_quality,
                "skipped_segments": skipped.get(h.hyp_id, []),
            })
        with open(os.path.join(tdir, "manifest.json"), "w") as f:
            json.dump(manifest, f, indent=1)

    def close(self):
        self._csv.close()
        self._diag.close()


def _setup(config):
    with _stage("config"):
        scene_spec = load_scene_spec(config.scene)
        actions = load_actions(config.actions)
    with _stage("scene"):
        world = generate_scene(scene_spec)
        cam = camera_from_dict(scene_spec.camera, scene_spec.workspace)
    return world, actions, cam


def _sample_states(obs, cam, config, sim_rng, sampler_rng, writer=None,
                   hyp_base=None, t=0):
    """Fresh weighted (s, VoxelState) pairs from one observation."""
    with _stage("tree"):
        tree = synth_tree(obs.labels,
                          config.noise.tree if config.noise else None,
                          np.random.default_rng(child_seed(sim_rng)),
                          cell=config.superpixel_cell)
        value = RegionCoherenceValue(tree, config.segment_penalty)
    with _stage("sampling"):
        cfg = dataclasses.replace(config.sampler, seed=child_seed(sampler_rng))
        samples = sample_segmentations(tree, value, cfg)
    with _stage("completion"):
        out = []
        skipped_map = {}
        for i, s in enumerate(samples):
            skipped = []
            state = lift(s, obs.depth, cam, config.grid, skipped=skipped)
            out.append((s.weight, state))
            if hyp_base is not None:
                skipped_map[hyp_base + i] = skipped
    return out, skipped_map


def _initial_population(obs, cam, config, sim_rng, sampler_rng):
    pairs, skipped = _sample_states(obs, cam, config, sim_rng, sampler_rng,
                                    hyp_base=0)
    hyps = [Hypothesis(state, weight, lineage=(None, i, 0), hyp_id=i)
            for i, (weight, state) in enumerate(pairs)]
    return HypothesisSet(hyps, 0), skipped


def _score_and_log(writer, t, hypotheses, truth, skipped):
    with _stage("metrics"):
        reports = [quality(h.state, truth) for h in hypotheses]
        writer.metrics(t, hypotheses, reports)
        writer.dump(t, hypotheses, skipped)
    weights = [h.weight for h in hypotheses]
    qs = [r.q for r in reports]
    return StepSummary(t, qs[int(np.argmax(weights))], max(qs),
                       float(np.mean(qs)))


def run_pipeline(config, method=METHOD_MST):
    """Run the full multi-hypothesis pipeline (or a baseline variant).

    Writes per-step hypothesis dumps, a metrics CSV, and a tracking
    diagnostics log under ``config.out_dir``; returns the per-step summary.
    """
    if method not in (METHOD_MST, METHOD_SINGLE_FRAME, METHOD_TRACKING_ONLY):
        raise ValueError(f"unknown method {method!r}")
    world, actions, cam = _setup(config)
    sim_rng = substream(config.seed, "sim")
    sampler_rng = substream(config.seed, "sampler")
    fusion_rng = substream(config.seed, "fusion")
    tracking_rng = substream(config.seed, "tracking")

    run_id = f"{method}_s{config.seed}"
    writer = _RunWriter(config.out_dir, run_id, method, config.seed)
    steps = []
    try:
        with _stage("render"):
            obs = render(world, cam, config.noise,
                         np.random.default_rng(child_seed(sim_rng)))
        hyps, skipped = _initial_population(obs, cam, config, sim_rng, sampler_rng)
        with _stage("scene"):
            truth = ground_truth_voxels(world, config.grid)
        steps.append(_score_and_log(writer, 0, hyps, truth, skipped))

        next_id = len(hyps)
        for t, action in enumerate(actions, start=1):
            with _stage("scene"):
                frames = step_world(world, action)
                world_next = frames[-1]
            with _stage("render"):
                obs_next = render(world_next, cam, config.noise,
                                  np.random.default_rng(child_seed(sim_rng)))

            if method == METHOD_SINGLE_FRAME:
                pairs, skipped = _sample_states(obs_next, cam, config, sim_rng,
                                                sampler_rng, hyp_base=next_id)
                new = [Hypothesis(state, w, lineage=(None, i, t),
                                  hyp_id=next_id + i)
                       for i, (w, state) in enumerate(pairs)]
                hyps = HypothesisSet(new, t)
                next_id += len(new)
            else:
                with _stage("tracking"):
                    tracker = OracleMaskTracker(
                        world, world_next, cam, config.noise,
                        np.random.default_rng(child_seed(sim_rng)))
                    corr_source = SimCorrespondenceSource(
                        world, world_next, cam, config.noise,
                        np.random.default_rng(child_seed(sim_rng)))
                    predicted = []
                    for h in hyps:
                        records = []
                        track_cfg = dataclasses.replace(
                            config.tracking, seed=child_seed(tracking_rng))
                        traj = track_objects((obs, obs_next), h.state, cam,
                                             tracker, corr_source, track_cfg,
                                             diagnostics=records)
                        writer.diagnostics(t, h.hyp_id, records)
                        moved = apply_trajectory(h.state, traj)
                        with _stage("refine"):
                            refined, q_r = free_space_refine(moved, obs_next.depth, cam)
                        predicted.append(Hypothesis(
                            refined, h.weight, lineage=(h.hyp_id, None, t),
                            refine_quality=q_r, hyp_id=h.hyp_id))
                if method == METHOD_TRACKING_ONLY:
                    new = []
                    for h in predicted:
                        w = h.weight * (h.refine_quality ** config.fusion.lam)
                        new.append(dataclasses.replace(h, weight=w))
                    hyps = HypothesisSet(new, t)
                    skipped = {}
                else:
                    pairs, skipped = _sample_states(obs_next, cam, config,
                                                    sim_rng, sampler_rng,
                                                    hyp_base=next_id)
                    with _stage("fusion"):
                        candidates = fuse_populations(
                            HypothesisSet(predicted, t - 1), pairs,
                            config.fusion.eta, fusion_rng, config.fusion.lam,
                            config.fusion.mode_window,
                            config.fusion.mode_consensus)
                    with _stage("resample"):
                        hyps = resample(candidates, config.sampler.n,
                                        fusion_rng, t)
                        for h in hyps:
                            h.hyp_id = next_id
                            next_id += 1

            with _stage("scene"):
                truth = ground_truth_voxels(world_next, config.grid)
            steps.append(_score_and_log(writer, t, hyps, truth, skipped))
            world, obs = world_next, obs_next
    finally:
        writer.close()
    return RunReport(run_id, method, config.seed, steps, config.out_dir)


def run_baseline(config, method):
    """Run one baseline: 'single-frame' or 'tracking-only'."""
    if method not in (METHOD_SINGLE_FRAME, METHOD_TRACKING_ONLY):
        raise ValueError(f"unknown baseline {method!r}")
    return run_pipeline(config, method)


def run_baselines(config):
    """Run both baselines into sibling output directories."""
    reports = {}
    for method in (METHOD_SINGLE_FRAME, METHOD_TRACKING_ONLY):
        sub = dataclasses.replace(config, out_dir=os.path.join(config.out_dir, method))
        reports[method] = run_baseline(sub, method)
    return reports


def export_report(run_dir, out_path=None):
    """Aggregate metrics CSVs below ``run_dir`` into per-(method, t) summary rows.

    Each run contributes its max-weight-hypothesis q, best q, and mean q per
    step; the summary reports mean and standard deviation of each across
    runs.  Raises when no metrics files exist.
    """
    files = []
    for root, _, names in os.walk(run_dir):
        if "metrics.csv" in names:
            files.append(os.path.join(root, "metrics.csv"))
    if not files:
        raise FileNotFoundError(f"no runs found under {run_dir}")
    per_run = {}
    for path in sorted(files):
        with open(path) as f:
            for row in csv.DictReader(f):
                key = (row["method"], int(row["t"]), row["run_id"], path)
                per_run.setdefault(key, []).append(
                    (float(row["weight"]), float(row["q"])))
    grouped = {}
    for (method, t, run_id, path), entries in per_run.items():
        weights = [w for w, _ in entries]
        qs = [q for _, q in entries]
        grouped.setdefault((method, t), []).append(
            (qs[int(np.argmax(weights))], max(qs), float(np.mean(qs))))
    rows = []
    for (method, t) in sorted(grouped):
        data = np.array(grouped[(method, t)])
        rows.append({
            "method": method, "t": t, "runs": len(data),
            "maxw_q_mean": data[:, 0].mean(), "maxw_q_std": data[:, 0].std(),
            "best_q_mean": data[:, 1].mean(), "best_q_std": data[:, 1].std(),
            "mean_q_mean": data[:, 2].mean(), "mean_q_std": data[:, 2].std(),
        })
    if out_path is not None:
        with open(out_path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return rows
