"""Scene pairs read from a dataset manifest."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..datasetforge.io import load_mask, load_png, read_manifest, resolve
from ..geometry import BevSpec, CameraRig


@dataclass
class ScenePair:
    scene: int
    frontal: np.ndarray  # frame 0, (H, W, 3) in [0, 1]
    ipm: np.ndarray  # homography IPM of frame 0 (conditioning input of D)
    label: np.ndarray  # stitched training target
    coverage: np.ndarray  # bool, pixels the stitcher wrote
    truth: np.ndarray  # clean orthographic BEV
    occlusion: np.ndarray  # bool, ground hidden behind objects in frame 0
    n_objects: int


def load_records(manifest) -> list[dict]:
    path = Path(manifest)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    records = read_manifest(path)
    for rec in records:
        for key in ("frames", "ipm", "label", "coverage", "truth", "occlusion", "rig", "bev", "split"):
            if key not in rec:
                raise ValueError(f"{path}: scene {rec.get('scene')} has no {key!r} entry")
    return records


def geometry_of(records: list[dict]) -> tuple[CameraRig, BevSpec]:
    if not records:
        raise ValueError("manifest has no scenes")
    rig, bev = records[0]["rig"], records[0]["bev"]
    if any(r["rig"] != rig or r["bev"] != bev for r in records):
        raise ValueError("all scenes in a manifest must share one rig and BEV spec")
    return CameraRig.from_dict(rig), BevSpec.from_dict(bev)


def load_pair(manifest, rec: dict) -> ScenePair:
    f = lambda key: resolve(manifest, rec[key])
    return ScenePair(
        scene=rec["scene"],
        frontal=load_png(resolve(manifest, rec["frames"][0])),
        ipm=load_png(f("ipm")),
        label=load_png(f("label")),
        coverage=load_mask(f("coverage")),
        truth=load_png(f("truth")),
        occlusion=load_mask(f("occlusion")),
        n_objects=int(rec.get("n_objects", 0)),
    )


def load_split(manifest, split: str, limit: int = 0) -> list[ScenePair]:
    """All scenes of one split in manifest order (the first ``limit`` if positive)."""
    if split not in ("train", "test", "all"):
        raise ValueError(f"split must be train, test or all, got {split!r}")
    recs = [r for r in load_records(manifest) if split == "all" or r["split"] == split]
    if limit:
        recs = recs[:limit]
    return [load_pair(manifest, r) for r in recs]
