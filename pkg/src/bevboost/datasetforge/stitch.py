"""Odometry-based label stitching.

Every frame contributes its flat-ground IPM, restricted to the near-field band
where ground sampling is densest, resampled straight into frame 0's BEV
raster.  Later frames overwrite earlier ones.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import BevSpec, CameraRig, PosePlanar, derive_ground_homography, pose_to_bev_shift
from ..warp import valid_mask, warp_image

DEFAULT_TRUST_DEPTH = 6.0


class EmptySequence(ValueError):
    pass


@dataclass
class SequenceFrame:
    image: np.ndarray  # (H, W, C) float
    pose: PosePlanar  # relative to frame 0
    timestamp: float = 0.0


@dataclass
class StitchResult:
    label: np.ndarray
    coverage: np.ndarray  # bool (H, W)
    writer: np.ndarray  # index of the frame that last wrote each pixel, -1 if none
    n_used: int


def validate_sequence(frames) -> None:
    if not frames:
        raise EmptySequence("no frames to stitch")
    xs = [f.pose.x for f in frames]
    if any(b < a for a, b in zip(xs, xs[1:])):
        raise ValueError("poses must progress forward (non-decreasing x)")


def frame_band(spec: BevSpec, back: np.ndarray, trust_depth: float) -> np.ndarray:
    """Frame-0 raster pixels that fall in a frame's raster within its trust band.

    ``back`` maps frame-0 raster pixels to the frame's raster pixels.
    """
    rows, cols = np.mgrid[0:spec.height, 0:spec.width].astype(np.float64)
    col_t = back[0, 0] * cols + back[0, 1] * rows + back[0, 2]
    row_t = back[1, 0] * cols + back[1, 1] * rows + back[1, 2]
    x_t = spec.x_max - (row_t + 0.5) * spec.mpp
    return ((x_t >= spec.x_min) & (x_t <= spec.x_min + trust_depth)
            & (col_t >= -0.5) & (col_t <= spec.width - 0.5))


def stitch_labels(frames, rig: CameraRig, spec: BevSpec, trust_depth: float = DEFAULT_TRUST_DEPTH) -> StitchResult:
    validate_sequence(frames)
    if not 0 < trust_depth <= spec.x_max:
        raise ValueError(f"trust_depth must lie in (0, x_max={spec.x_max}], got {trust_depth}")
    h_ipm = derive_ground_homography(rig, spec)
    first = np.asarray(frames[0].image)
    channels = first.shape[2] if first.ndim == 3 else 1
    label = np.zeros((spec.height, spec.width, channels))
    writer = np.full((spec.height, spec.width), -1, dtype=np.int32)
    used = 0
    for t, frame in enumerate(frames):
        if frame.pose.x >= spec.x_max:
            break
        img = np.asarray(frame.image, dtype=np.float64)
        if img.ndim == 2:
            img = img[..., None]
        back = np.linalg.inv(pose_to_bev_shift(frame.pose, spec))
        h_t = h_ipm @ back
        write = frame_band(spec, back, trust_depth) & valid_mask(img.shape[0], img.shape[1], h_t,
                                                                 spec.height, spec.width)
        used += 1
        if not write.any():
            continue
        warped = warp_image(img, h_t, spec.height, spec.width)
        label[write] = warped[write]
        writer[write] = t
    return StitchResult(label, writer >= 0, writer, used)
