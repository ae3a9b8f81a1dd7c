"""Camera rigs, ground-plane homographies and the bird's-eye-view raster.

Coordinate frames
-----------------
Ground (vehicle) frame: x forward, y left, z up; the ground is the plane
z = 0 and the camera centre sits at (0, 0, cam_height).

Camera frame: x right, y down, z along the optical axis (OpenCV).

BEV raster: row 0 is the farthest forward distance ``x_max``; column
``W/2`` contains the vehicle centreline.  Pixel (col, row) covers the ground
cell ``x in [x_max - (row+1)*mpp, x_max - row*mpp]`` and
``y in [(W/2 - col - 1)*mpp, (W/2 - col)*mpp]``; its centre is the
sampling point.

Homographies are 3x3 float64 arrays normalised by :func:`normalize_homography`.
A homography built here maps *output* pixels to *input* pixels, which is the
direction an inverse warp needs.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, coerce, format_config, read_config, section


class GeometryError(ValueError):
    pass


class AboveHorizon(GeometryError):
    """The back-projected ray never reaches the ground ahead of the camera."""


class DegenerateView(GeometryError):
    """Part of the requested ground region is not in front of the camera."""


@dataclass(frozen=True)
class CameraRig:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    cam_height: float
    pitch: float
    roll: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise GeometryError("focal lengths must be positive")
        if not self.cam_height > 0:
            raise GeometryError("cam_height must be positive")
        if not (0.0 <= self.pitch <= math.pi / 2 + 1e-12):
            raise GeometryError("pitch must lie in [0, pi/2]")
        if self.width < 1 or self.height < 1:
            raise GeometryError("raster must be at least 1x1")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def center(self) -> np.ndarray:
        return np.array([0.0, 0.0, self.cam_height])

    @property
    def rotation(self) -> np.ndarray:
        """Camera-to-ground rotation (columns are the camera axes in ground coordinates)."""
        return camera_rotation(self.pitch, self.roll, self.yaw)

    @classmethod
    def from_dict(cls, values: dict) -> "CameraRig":
        kw = {k: coerce(str(v)) for k, v in values.items()}
        try:
            kw["width"] = int(kw["width"])
            kw["height"] = int(kw["height"])
            return cls(**{k: kw[k] for k in kw if k in cls.__dataclass_fields__})
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad camera rig config: {exc}") from exc

    @classmethod
    def from_file(cls, path: str | Path) -> "CameraRig":
        return cls.from_dict(section(read_config(path)))

    def to_config(self) -> str:
        return format_config(asdict(self))


@dataclass(frozen=True)
class BevSpec:
    x_min: float = 4.0
    x_max: float = 24.0
    y_half: float = 10.0
    mpp: float = 0.05

    def __post_init__(self):
        if not (self.x_max > self.x_min >= 0):
            raise GeometryError("need x_max > x_min >= 0")
        if not (self.y_half > 0 and self.mpp > 0):
            raise GeometryError("y_half and mpp must be positive")

    @property
    def width(self) -> int:
        return _ceil(2 * self.y_half / self.mpp)

    @property
    def height(self) -> int:
        return _ceil((self.x_max - self.x_min) / self.mpp)

    @property
    def pixel_to_ground(self) -> np.ndarray:
        """Affine map from BEV pixel (col, row, 1) to ground (x, y, 1)."""
        m = self.mpp
        return np.array([
            [0.0, -m, self.x_max - 0.5 * m],
            [-m, 0.0, (self.width / 2 - 0.5) * m],
            [0.0, 0.0, 1.0],
        ])

    @property
    def ground_to_pixel(self) -> np.ndarray:
        return np.linalg.inv(self.pixel_to_ground)

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Ground (x, y) of every BEV pixel centre, each of shape (H, W)."""
        rows, cols = np.mgrid[0:self.height, 0:self.width].astype(np.float64)
        x = self.x_max - (rows + 0.5) * self.mpp
        y = (self.width / 2 - cols - 0.5) * self.mpp
        return x, y

    def ground_to_rowcol(self, x, y):
        """Raster cell containing a ground point (floor convention)."""
        row = np.floor((self.x_max - np.asarray(x)) / self.mpp).astype(int)
        col = np.floor(self.width / 2 - np.asarray(y) / self.mpp).astype(int)
        return row, col

    @classmethod
    def from_dict(cls, values: dict) -> "BevSpec":
        kw = {k: float(v) for k, v in values.items() if k in cls.__dataclass_fields__}
        return cls(**kw)

    @classmethod
    def from_file(cls, path: str | Path) -> "BevSpec":
        return cls.from_dict(section(read_config(path)))

    def to_config(self) -> str:
        return format_config(asdict(self))


@dataclass(frozen=True)
class PosePlanar:
    """Pose of frame t in frame 0's ground coordinates."""

    x: float = 0.0
    y: float = 0.0
    yaw: float = field(default=0.0)

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.yaw)):
            raise GeometryError("pose must be finite")
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    @property
    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s, self.x], [s, c, self.y], [0.0, 0.0, 1.0]])

    def compose(self, other: "PosePlanar") -> "PosePlanar":
        """``self`` followed by ``other`` expressed in self's frame."""
        m = self.matrix @ other.matrix
        return PosePlanar(m[0, 2], m[1, 2], math.atan2(m[1, 0], m[0, 0]))

    def inverse(self) -> "PosePlanar":
        m = np.linalg.inv(self.matrix)
        return PosePlanar(m[0, 2], m[1, 2], -self.yaw)

    @classmethod
    def from_se3(cls, T: np.ndarray) -> "PosePlanar":
        """Drop z, roll and pitch from a 4x4 rigid transform."""
        T = np.asarray(T, dtype=np.float64)
        return cls(T[0, 3], T[1, 3], math.atan2(T[1, 0], T[0, 0]))


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    return math.pi - ((math.pi - a) % (2 * math.pi))


def _ceil(v: float) -> int:
    return int(math.ceil(round(v, 9)))


def camera_rotation(pitch: float, roll: float = 0.0, yaw: float = 0.0) -> np.ndarray:
    cp, sp = math.cos(pitch), math.sin(pitch)
    base = np.array([
        [0.0, -sp, cp],
        [-1.0, 0.0, 0.0],
        [0.0, -cp, -sp],
    ])
    cr, sr = math.cos(roll), math.sin(roll)
    about_axis = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    cy, sy = math.cos(yaw), math.sin(yaw)
    about_up = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    return about_up @ base @ about_axis


def normalize_homography(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise GeometryError(f"expected 3x3 matrix, got {m.shape}")
    if abs(m[2, 2]) > 1e-12:
        return m / m[2, 2]
    out = m / np.linalg.norm(m)
    flat = out.ravel()
    if flat[np.argmax(np.abs(flat))] < 0:
        out = -out
    return out


def apply_homography(h: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Map (..., 2) points through ``h`` with the homogeneous divide."""
    pts = np.asarray(pts, dtype=np.float64)
    ph = pts @ h[:, :2].T + h[:, 2]
    return ph[..., :2] / ph[..., 2:3]


def project_pixel_to_ground(rig: CameraRig, u: float, v: float) -> tuple[float, float]:
    if not (-0.5 <= u <= rig.width - 0.5 and -0.5 <= v <= rig.height - 0.5):
        raise GeometryError(f"pixel ({u}, {v}) outside the {rig.width}x{rig.height} raster")
    ray_cam = np.array([(u - rig.cx) / rig.fx, (v - rig.cy) / rig.fy, 1.0])
    ray = rig.rotation @ ray_cam
    if -ray[2] <= 0:
        raise AboveHorizon(f"pixel ({u}, {v}) is at or above the horizon")
    t = rig.cam_height / -ray[2]
    return float(t * ray[0]), float(t * ray[1])


def ground_to_image(rig: CameraRig) -> np.ndarray:
    """Homography from ground (x, y, 1) to camera pixels."""
    r_cw = rig.rotation.T
    t = -r_cw @ rig.center
    return rig.K @ np.column_stack([r_cw[:, 0], r_cw[:, 1], t])


def _probe_grid(spec: BevSpec, n: int = 10) -> np.ndarray:
    cols = np.linspace(0, spec.width - 1, n)
    rows = np.linspace(0, spec.height - 1, n)
    cc, rr = np.meshgrid(cols, rows)
    return np.stack([cc.ravel(), rr.ravel()], axis=1)


def derive_ground_homography(rig: CameraRig, spec: BevSpec) -> np.ndarray:
    """BEV pixel -> front camera pixel."""
    h = ground_to_image(rig) @ spec.pixel_to_ground
    probe = _probe_grid(spec)
    w = probe @ h[2, :2] + h[2, 2]
    if np.any(w <= 1e-9):
        raise DegenerateView("part of the BEV region lies behind the camera plane")
    return normalize_homography(h)


def pixel_to_normalized(width: int, height: int) -> np.ndarray:
    """Pixel centres -> [-1, 1], where -1/+1 are the first/last pixel centres."""
    if width < 2 or height < 2:
        raise GeometryError("normalized coordinates need at least 2 pixels per axis")
    return np.array([
        [2.0 / (width - 1), 0.0, -1.0],
        [0.0, 2.0 / (height - 1), -1.0],
        [0.0, 0.0, 1.0],
    ])


def to_normalized(h_pix: np.ndarray, in_size: tuple[int, int], out_size: tuple[int, int]) -> np.ndarray:
    """Pixel-frame sampling homography -> normalized frame.  Sizes are (width, height)."""
    n_in = pixel_to_normalized(*in_size)
    n_out = pixel_to_normalized(*out_size)
    return normalize_homography(n_in @ h_pix @ np.linalg.inv(n_out))


def to_pixel(h_norm: np.ndarray, in_size: tuple[int, int], out_size: tuple[int, int]) -> np.ndarray:
    n_in = pixel_to_normalized(*in_size)
    n_out = pixel_to_normalized(*out_size)
    return normalize_homography(np.linalg.inv(n_in) @ h_norm @ n_out)


def compose_chain(mats) -> np.ndarray:
    """Sampling map of warps applied in list order: M_1 @ M_2 @ ... @ M_N."""
    out = np.eye(3)
    for m in mats:
        out = out @ m
    return normalize_homography(out)


def _rotation_power(r: np.ndarray, t: float) -> np.ndarray:
    """R**t for a rotation matrix via its axis-angle form."""
    cos_a = np.clip((np.trace(r) - 1) / 2, -1.0, 1.0)
    angle = math.acos(cos_a)
    if angle < 1e-15:
        return np.eye(3)
    axis = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]]) / (2 * math.sin(angle))
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    a = angle * t
    return np.eye(3) + math.sin(a) * k + (1 - math.cos(a)) * (k @ k)


def _fit_view(r_wc: np.ndarray, center: np.ndarray, corners: np.ndarray) -> np.ndarray:
    """Affine plane->normalized map that frames the projected BEV corners in [-1, 1]^2."""
    rel = np.column_stack([corners, np.zeros(len(corners))]) - center
    cam = rel @ r_wc  # == (r_wc.T @ rel.T).T
    if np.any(cam[:, 2] <= 1e-9):
        raise DegenerateView("BEV region leaves an intermediate virtual view")
    a = cam[:, 0] / cam[:, 2]
    b = cam[:, 1] / cam[:, 2]
    a0, a1, b0, b1 = a.min(), a.max(), b.min(), b.max()
    if a1 - a0 < 1e-12 or b1 - b0 < 1e-12:
        raise DegenerateView("BEV region collapses in an intermediate virtual view")
    return np.array([
        [2 / (a1 - a0), 0.0, -(a1 + a0) / (a1 - a0)],
        [0.0, 2 / (b1 - b0), -(b1 + b0) / (b1 - b0)],
        [0.0, 0.0, 1.0],
    ])


def decompose_incremental(rig: CameraRig, spec: BevSpec, n_steps: int) -> list[np.ndarray]:
    """Split the frontal->BEV sampling homography into ``n_steps`` virtual-camera steps.

    The virtual camera keeps the real camera centre and rotates in equal
    angular increments from the rig attitude to a vehicle-aligned nadir view.
    Intermediate views are framed so the BEV region fills [-1, 1]^2.  The
    returned homographies are in normalized coordinates and listed in the
    order a network applies them; ``compose_chain`` of the list, converted to
    pixels, is ``derive_ground_homography(rig, spec)``.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    derive_ground_homography(rig, spec)  # raises DegenerateView early
    bev_size = (spec.width, spec.height)
    corners_pix = np.array([[0, 0], [bev_size[0] - 1, 0], [0, bev_size[1] - 1], [bev_size[0] - 1, bev_size[1] - 1]], float)
    corners = apply_homography(spec.pixel_to_ground, corners_pix)
    center = rig.center

    r0 = rig.rotation
    rn = camera_rotation(math.pi / 2)
    step = _rotation_power(r0.T @ rn, 1.0 / n_steps)

    h = rig.cam_height
    plane_to_ground = np.array([[0.0, -h, 0.0], [-h, 0.0, 0.0], [0.0, 0.0, 1.0]])
    frames = [pixel_to_normalized(rig.width, rig.height) @ rig.K]
    rotations = [r0]
    for k in range(1, n_steps + 1):
        rotations.append(rotations[-1] @ step)
        if k < n_steps:
            frames.append(_fit_view(rotations[-1], center, corners))
    frames.append(pixel_to_normalized(*bev_size) @ spec.ground_to_pixel @ plane_to_ground)
    rotations[-1] = rn  # remove accumulated round-off

    out = []
    for k in range(1, n_steps + 1):
        m = frames[k - 1] @ rotations[k - 1].T @ rotations[k] @ np.linalg.inv(frames[k])
        out.append(normalize_homography(m))
    return out


def pose_to_bev_shift(pose: PosePlanar, spec: BevSpec) -> np.ndarray:
    """Affine map from frame-t BEV raster coordinates to frame-0 raster coordinates."""
    a = spec.pixel_to_ground
    m = spec.ground_to_pixel @ pose.matrix @ a
    m[2] = (0.0, 0.0, 1.0)
    return m
