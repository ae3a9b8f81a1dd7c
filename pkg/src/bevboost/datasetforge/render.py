"""Ray-cast renders of synthetic scenes: frontal camera views, orthographic BEV truth, occlusion masks."""
from __future__ import annotations

import math

import numpy as np

from ..geometry import BevSpec, CameraRig, PosePlanar, derive_ground_homography
from ..warp import warp_image
from .scene import SceneSpec, layout

GROUND, SKY = -1, -2
SKY_COLOR = np.array([0.55, 0.70, 0.92])
FACE_SHADE = (0.85, 0.70, 1.0)  # entering through an x face, a y face, the top


def _rz(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def camera_pose(rig: CameraRig, pose: PosePlanar) -> tuple[np.ndarray, np.ndarray]:
    """World-frame camera centre and camera-to-world rotation for a vehicle pose."""
    origin = np.array([pose.x, pose.y, rig.cam_height])
    return origin, _rz(pose.yaw) @ rig.rotation


def _box_hits(origin, dirs, bounds):
    """Entry distance (inf on a miss) and entry-face axis of rays against an axis-aligned box."""
    lo = np.array(bounds[0::2])
    hi = np.array(bounds[1::2])
    d = np.where(np.abs(dirs) < 1e-15, 1e-15, dirs)
    t1 = (lo - origin) / d
    t2 = (hi - origin) / d
    near = np.minimum(t1, t2)
    t_near = near.max(axis=-1)
    t_far = np.maximum(t1, t2).min(axis=-1)
    hit = (t_near <= t_far) & (t_near > 0)
    return np.where(hit, t_near, np.inf), near.argmax(axis=-1)


def cast(scene: SceneSpec, rig: CameraRig, pose: PosePlanar, frame_index: int, us, vs) -> dict:
    """Trace rays through image points (us, vs).

    Returns the unlit colour, hit distance, object id (``GROUND``, ``SKY`` or a
    box index) and the world (x, y) of ground hits (NaN elsewhere).
    """
    us = np.asarray(us, dtype=np.float64)
    vs = np.asarray(vs, dtype=np.float64)
    origin, r_wc = camera_pose(rig, pose)
    ray_cam = np.stack([(us - rig.cx) / rig.fx, (vs - rig.cy) / rig.fy, np.ones_like(us)], axis=-1)
    dirs = ray_cam @ r_wc.T

    a = math.tan(scene.lateral_slope)
    denom = dirs[..., 2] - a * dirs[..., 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_ground = np.where(denom < -1e-12, (a * origin[1] - origin[2]) / denom, np.inf)
    hit_ground = np.isfinite(t_ground)
    gx = origin[0] + t_ground * dirs[..., 0]
    gy = origin[1] + t_ground * dirs[..., 1]
    gx = np.where(hit_ground, gx, 0.0)
    gy = np.where(hit_ground, gy, 0.0)

    elevation = np.clip(dirs[..., 2] / np.linalg.norm(dirs, axis=-1), 0, 1)[..., None]
    color = np.where(hit_ground[..., None], layout(scene, gx, gy), SKY_COLOR * (0.85 + 0.15 * elevation))
    ids = np.where(hit_ground, GROUND, SKY)
    depth = t_ground.copy()
    for k, box in enumerate(scene.objects):
        t_box, axis = _box_hits(origin, dirs, scene.box_bounds(box, frame_index))
        closer = t_box < depth
        if not closer.any():
            continue
        shade = np.choose(axis, FACE_SHADE)[..., None]
        color = np.where(closer[..., None], np.asarray(box.color) * shade, color)
        ids = np.where(closer, k, ids)
        depth = np.where(closer, t_box, depth)

    ground_xy = np.stack([gx, gy], axis=-1)
    ground_xy[ids != GROUND] = np.nan
    return {"color": color, "depth": depth, "object_id": ids, "ground_xy": ground_xy}


def _subsample_offsets(ss: int) -> np.ndarray:
    return (np.arange(ss) + 0.5) / ss - 0.5


def _illuminate(scene: SceneSpec, img: np.ndarray, frame_index: int) -> np.ndarray:
    gain, offset = scene.illumination.gain_offset(frame_index)
    out = img * gain + offset
    band = scene.illumination.overexposure
    if band is not None:
        r0, r1, strength = band
        rows = np.arange(img.shape[0], dtype=np.float64)
        mid, half = (r0 + r1) / 2, max((r1 - r0) / 2, 1e-9)
        bump = np.clip(1 - np.abs(rows - mid) / half, 0, 1)
        out = out + strength * np.sin(0.5 * math.pi * bump)[:, None, None]
    return np.clip(out, 0.0, 1.0)


def render_scene(scene: SceneSpec, rig: CameraRig, pose: PosePlanar = PosePlanar(0, 0, 0),
                 frame_index: int = 0, ss: int = 2, illumination: bool = True) -> np.ndarray:
    """Pinhole render (H, W, 3) in [0, 1], box-filtered over ss x ss samples per pixel."""
    offs = _subsample_offsets(ss)
    vv, uu = np.mgrid[0:rig.height, 0:rig.width].astype(np.float64)
    acc = np.zeros((rig.height, rig.width, 3))
    for dv in offs:
        for du in offs:
            acc += cast(scene, rig, pose, frame_index, uu + du, vv + dv)["color"]
    img = acc / (ss * ss)
    return _illuminate(scene, img, frame_index) if illumination else img


def render_layers(scene: SceneSpec, rig: CameraRig, pose: PosePlanar = PosePlanar(0, 0, 0),
                  frame_index: int = 0) -> dict:
    """Object ids and ground coordinates sampled at pixel centres."""
    vv, uu = np.mgrid[0:rig.height, 0:rig.width].astype(np.float64)
    hit = cast(scene, rig, pose, frame_index, uu, vv)
    return {"object_id": hit["object_id"], "ground_xy": hit["ground_xy"]}


def bev_world_points(spec: BevSpec, pose: PosePlanar, dcol: float = 0.0, drow: float = 0.0):
    rows, cols = np.mgrid[0:spec.height, 0:spec.width].astype(np.float64)
    x = spec.x_max - (rows + 0.5 + drow) * spec.mpp
    y = (spec.width / 2 - cols - 0.5 - dcol) * spec.mpp
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    return pose.x + c * x - s * y, pose.y + s * x + c * y


def render_bev_truth(scene: SceneSpec, spec: BevSpec, pose: PosePlanar = PosePlanar(0, 0, 0),
                     ss: int = 2) -> np.ndarray:
    """Orthographic view of the painted ground, no objects, no lighting changes."""
    offs = _subsample_offsets(ss)
    acc = np.zeros((spec.height, spec.width, 3))
    for dr in offs:
        for dc in offs:
            acc += layout(scene, *bev_world_points(spec, pose, dc, dr))
    return acc / (ss * ss)


def homography_ipm(image: np.ndarray, rig: CameraRig, spec: BevSpec) -> np.ndarray:
    """Plain flat-ground inverse perspective mapping of a frontal image."""
    return warp_image(image, derive_ground_homography(rig, spec), spec.height, spec.width)


def occlusion_mask(scene: SceneSpec, rig: CameraRig, spec: BevSpec, pose: PosePlanar = PosePlanar(0, 0, 0),
                   frame_index: int = 0) -> np.ndarray:
    """BEV pixels inside the camera view whose ground point is hidden behind an object."""
    gx, gy = bev_world_points(spec, pose)
    gz = math.tan(scene.lateral_slope) * gy
    origin, r_wc = camera_pose(rig, pose)
    seg = np.stack([gx, gy, gz], axis=-1) - origin
    cam = seg @ r_wc
    with np.errstate(divide="ignore", invalid="ignore"):
        u = rig.fx * cam[..., 0] / cam[..., 2] + rig.cx
        v = rig.fy * cam[..., 1] / cam[..., 2] + rig.cy
    visible = (cam[..., 2] > 0) & (u >= 0) & (u <= rig.width - 1) & (v >= 0) & (v <= rig.height - 1)
    hidden = np.zeros(visible.shape, dtype=bool)
    for box in scene.objects:
        t_box, _ = _box_hits(origin, seg, scene.box_bounds(box, frame_index))
        hidden |= t_box < 1.0
    return visible & hidden
