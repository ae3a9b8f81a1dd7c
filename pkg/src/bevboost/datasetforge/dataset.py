"""Synthetic training-set builder.

Each scene directory holds the frontal frames, their poses, the stitched
(imperfect) label with its coverage mask, the clean BEV truth, the frame-0
homography IPM and the frame-0 occlusion mask.  ``manifest.jsonl`` has one
record per scene with paths relative to the manifest.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..geometry import BevSpec, CameraRig, PosePlanar
from ..presets import desk_rig, desk_spec
from .io import load_png, quantize, read_poses, resolve, save_png, write_manifest, write_poses
from .render import homography_ipm, occlusion_mask, render_bev_truth, render_scene
from .scene import SceneRandomization, SceneSpec, random_scene, vehicle_path
from .stitch import DEFAULT_TRUST_DEPTH, SequenceFrame, stitch_labels

FRAME_RATE = 10.0  # Hz, only used for timestamps
TEST_EVERY = 10  # scene i is held out when i % 10 == 9


def split_of(index: int) -> str:
    return "test" if index % TEST_EVERY == TEST_EVERY - 1 else "train"


def drive(scene: SceneSpec, speed: float, spec: BevSpec) -> list[PosePlanar]:
    """Poses every ``speed`` metres until the vehicle reaches the far edge of frame 0's raster."""
    poses = []
    t = 0
    while True:
        pose = PosePlanar(*vehicle_path(scene, speed * t))
        if pose.x >= spec.x_max:
            return poses
        poses.append(pose)
        t += 1


def build_sequence(scene: SceneSpec, rig: CameraRig, spec: BevSpec, speed: float,
                   ss: int = 2, quantized: bool = True) -> list[SequenceFrame]:
    frames = []
    for t, pose in enumerate(drive(scene, speed, spec)):
        img = render_scene(scene, rig, pose, frame_index=t, ss=ss)
        if quantized:
            img = quantize(img) / 255.0
        frames.append(SequenceFrame(img, pose, t / FRAME_RATE))
    return frames


def _build_scene(job) -> dict:
    index, scene_seed, cfg, rig, spec, out_dir, trust_depth = job
    rng = np.random.default_rng(scene_seed)
    scene, speed = random_scene(rng, cfg, image_height=rig.height)
    frames = build_sequence(scene, rig, spec, speed)
    stitched = stitch_labels(frames, rig, spec, trust_depth)

    name = f"scene_{index:04d}"
    d = Path(out_dir) / name
    d.mkdir(parents=True, exist_ok=True)
    frame_paths = []
    for t, fr in enumerate(frames):
        p = f"{name}/frame_{t:03d}.png"
        save_png(Path(out_dir) / p, fr.image)
        frame_paths.append(p)
    write_poses(d / "poses.csv", [f.pose for f in frames], [f.timestamp for f in frames])
    save_png(d / "label.png", stitched.label)
    save_png(d / "coverage.png", stitched.coverage)
    save_png(d / "truth.png", render_bev_truth(scene, spec))
    save_png(d / "ipm.png", homography_ipm(frames[0].image, rig, spec))
    save_png(d / "occlusion.png", occlusion_mask(scene, rig, spec))
    with open(d / "scene.json", "w") as fh:
        json.dump(scene.to_dict(), fh, sort_keys=True)
    return {
        "scene": index, "seed": int(scene_seed), "split": split_of(index),
        "frames": frame_paths, "poses": f"{name}/poses.csv", "label": f"{name}/label.png",
        "coverage": f"{name}/coverage.png", "truth": f"{name}/truth.png", "ipm": f"{name}/ipm.png",
        "occlusion": f"{name}/occlusion.png", "scene_spec": f"{name}/scene.json",
        "n_objects": len(scene.objects), "speed": speed, "trust_depth": trust_depth,
        "rig": asdict(rig), "bev": asdict(spec),
    }


def scene_seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1, dtype=np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def make_dataset(n_scenes: int, out_dir, rig: CameraRig | None = None, spec: BevSpec | None = None,
                 cfg: SceneRandomization = SceneRandomization(), seed: int = 0, workers: int | None = None,
                 trust_depth: float = DEFAULT_TRUST_DEPTH) -> list[dict]:
    rig = rig or desk_rig()
    spec = spec or desk_spec()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(i, s, cfg, rig, spec, str(out_dir), trust_depth) for i, s in enumerate(scene_seeds(seed, n_scenes))]
    workers = workers or os.cpu_count() or 1
    if workers == 1 or len(jobs) <= 1:
        records = [_build_scene(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_build_scene, jobs, chunksize=max(1, math.ceil(len(jobs) / (4 * workers)))))
    write_manifest(out_dir / "manifest.jsonl", records)
    return records


def load_sequence(manifest_path, record: dict) -> list[SequenceFrame]:
    poses, stamps = read_poses(resolve(manifest_path, record["poses"]))
    return [SequenceFrame(load_png(resolve(manifest_path, p)), pose, ts)
            for p, pose, ts in zip(record["frames"], poses, stamps)]
