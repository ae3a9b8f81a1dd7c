"""Desk-scale defaults shared by the dataset builder, training and the CLI."""
from __future__ import annotations

from .geometry import BevSpec, CameraRig


def desk_rig() -> CameraRig:
    """128x96 forward camera, 1.5 m above the road, pitched 0.25 rad down."""
    return CameraRig(fx=90.0, fy=90.0, cx=63.5, cy=47.5, width=128, height=96, cam_height=1.5, pitch=0.25)


def desk_spec() -> BevSpec:
    """12 m x 16 m ahead of the vehicle at 0.125 m per pixel: a 128x96 raster."""
    return BevSpec(x_min=4.0, x_max=16.0, y_half=8.0, mpp=0.125)
