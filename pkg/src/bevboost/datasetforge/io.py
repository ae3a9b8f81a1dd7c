"""File formats: 8-bit RGB PNG images, single-channel PNG masks, pose CSVs, JSON-lines manifests."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from PIL import Image

from ..geometry import PosePlanar

POSE_HEADER = ["frame", "x", "y", "yaw", "timestamp"]


def quantize(img: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)


def save_png(path, img: np.ndarray) -> None:
    """Write a float image in [0, 1] (H, W, 3) or a boolean mask (H, W)."""
    a = np.asarray(img)
    if a.dtype == bool:
        Image.fromarray(a.astype(np.uint8) * 255).save(path)
    else:
        Image.fromarray(quantize(a)).save(path)


def load_png(path) -> np.ndarray:
    """RGB PNG -> float64 (H, W, 3) in [0, 1]."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def load_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) > 127


def write_poses(path, poses, timestamps) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(POSE_HEADER)
        for i, (p, ts) in enumerate(zip(poses, timestamps)):
            w.writerow([i, repr(p.x), repr(p.y), repr(p.yaw), repr(float(ts))])


def read_poses(path) -> tuple[list[PosePlanar], list[float]]:
    poses, stamps = [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != POSE_HEADER:
            raise ValueError(f"{path}: expected header {','.join(POSE_HEADER)}")
        for row in reader:
            poses.append(PosePlanar(float(row["x"]), float(row["y"]), float(row["yaw"])))
            stamps.append(float(row["timestamp"]))
    return poses, stamps


def write_manifest(path, records) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_manifest(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def resolve(manifest_path, rel: str) -> Path:
    return Path(manifest_path).parent / rel
