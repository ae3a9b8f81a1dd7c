"""Procedural road scenes.

A scene is a painted ground layout (road, markings, low-frequency texture)
plus axis-aligned boxes standing on it.  Everything is expressed in the world
frame, which coincides with the vehicle frame at frame 0 (x forward, y left).
The road centreline follows ``y = offset + curvature * x^2 / 2``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

EDGE_SOFTNESS = 0.06  # metres over which painted edges ramp from 0 to 1
MARKING_WIDTH = 0.15


@dataclass(frozen=True)
class BoxObject:
    x: float
    y: float
    length: float
    width: float
    height: float
    color: tuple[float, float, float] = (0.8, 0.1, 0.1)
    vx: float = 0.0  # metres per frame along the road
    vy: float = 0.0  # metres per frame across it


@dataclass(frozen=True)
class Illumination:
    gains: tuple[float, ...] = ()
    offsets: tuple[float, ...] = ()
    overexposure: tuple[float, float, float] | None = None  # (row0, row1, strength) in image rows

    def gain_offset(self, frame_index: int) -> tuple[float, float]:
        g = self.gains[frame_index % len(self.gains)] if self.gains else 1.0
        o = self.offsets[frame_index % len(self.offsets)] if self.offsets else 0.0
        return g, o


@dataclass(frozen=True)
class SceneSpec:
    road_half_width: float = 4.0
    lane_count: int = 2
    dash_period: float = 4.0
    dash_duty: float = 0.5
    solid_edges: bool = True
    stop_line_x: float | None = None
    zigzag: tuple[float, float] | None = None  # x range of a zig-zag band along the right edge
    curvature: float = 0.0
    road_offset: float = 0.0
    texture_seed: int = 0
    objects: tuple[BoxObject, ...] = ()
    illumination: Illumination = field(default_factory=Illumination)
    lateral_slope: float = 0.0  # radians; the surface is z = tan(slope) * y
    asphalt: tuple[float, float, float] = (0.30, 0.30, 0.32)
    verge: tuple[float, float, float] = (0.28, 0.42, 0.22)
    paint: tuple[float, float, float] = (0.92, 0.92, 0.90)

    def __post_init__(self):
        if self.road_half_width <= 0 or self.lane_count < 1 or self.dash_period <= 0:
            raise ValueError("road_half_width, lane_count and dash_period must be positive")
        if not 0 < self.dash_duty <= 1:
            raise ValueError("dash_duty must lie in (0, 1]")
        for box in self.objects:
            if min(box.length, box.width, box.height) <= 0:
                raise ValueError("box dimensions must be positive")
            d = box.y - self.centerline(box.x)
            if abs(d) + box.width / 2 > self.road_half_width + 1e-9:
                raise ValueError(f"object at ({box.x}, {box.y}) is off the road at frame 0")

    def centerline(self, x):
        return self.road_offset + 0.5 * self.curvature * np.asarray(x) ** 2

    def box_bounds(self, box: BoxObject, frame_index: int) -> tuple[float, float, float, float, float, float]:
        """Axis-aligned bounds (x0, x1, y0, y1, z0, z1) of a box at a frame; moving boxes follow the road."""
        cx = box.x + box.vx * frame_index
        cy = box.y + box.vy * frame_index + float(self.centerline(cx) - self.centerline(box.x))
        return (cx - box.length / 2, cx + box.length / 2, cy - box.width / 2, cy + box.width / 2,
                0.0, box.height)

    @property
    def lane_width(self) -> float:
        return 2 * self.road_half_width / self.lane_count

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        d["objects"] = tuple(BoxObject(**{**o, "color": tuple(o["color"])}) for o in d.get("objects", ()))
        ill = d.get("illumination") or {}
        d["illumination"] = Illumination(
            gains=tuple(ill.get("gains", ())), offsets=tuple(ill.get("offsets", ())),
            overexposure=tuple(ill["overexposure"]) if ill.get("overexposure") else None)
        for key in ("asphalt", "verge", "paint", "zigzag"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)


def _ramp(dist):
    """Coverage of a painted region given signed distance inside it (metres)."""
    return np.clip(0.5 + np.asarray(dist) / EDGE_SOFTNESS, 0.0, 1.0)


def _stripe(d, centre, half_width):
    return _ramp(half_width - np.abs(d - centre))


def _dashes(s, period, duty):
    """Along-road on/off pattern with soft dash ends."""
    phase = np.mod(s, period)
    on = duty * period
    inside = np.minimum(phase, on - phase)
    off_gap = np.minimum(phase - on, period - phase)
    return np.where(phase < on, _ramp(inside), 1 - _ramp(off_gap))


def texture(seed: int, x, y) -> np.ndarray:
    """Smooth zero-mean relative luminance field (std about 0.035), wavelengths 1.5 to 6 m."""
    rng = np.random.default_rng(seed)
    out = np.zeros(np.broadcast(x, y).shape)
    for _ in range(6):
        lam = rng.uniform(1.5, 6.0)
        ang = rng.uniform(0, math.pi)
        ph = rng.uniform(0, 2 * math.pi)
        k = 2 * math.pi / lam
        out += np.sin(k * (math.cos(ang) * x + math.sin(ang) * y) + ph)
    return 0.02 * out


def paint_mask(scene: SceneSpec, x, y) -> np.ndarray:
    """Fraction of each ground point covered by road paint."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = y - scene.centerline(x)
    hw = scene.road_half_width
    half = MARKING_WIDTH / 2
    paint = np.zeros(np.broadcast(x, y).shape)
    if scene.solid_edges:
        paint = np.maximum(paint, _stripe(d, hw - 0.3, half))
        paint = np.maximum(paint, _stripe(d, -hw + 0.3, half))
    for k in range(1, scene.lane_count):
        centre = -hw + k * scene.lane_width
        paint = np.maximum(paint, _stripe(d, centre, half) * _dashes(x, scene.dash_period, scene.dash_duty))
    on_road = _ramp(hw - np.abs(d))
    if scene.stop_line_x is not None:
        band = _ramp(0.15 - np.abs(x - scene.stop_line_x))
        paint = np.maximum(paint, band * _ramp(hw - 0.3 - np.abs(d)))
    if scene.zigzag is not None:
        x0, x1 = scene.zigzag
        tri = 2 * np.abs(np.mod(x - x0, 2.0) / 2.0 - 0.5)  # period 2 m, values in [0, 1]
        centre = -hw + 0.6 + 0.7 * tri
        within = _ramp(np.minimum(x - x0, x1 - x))
        paint = np.maximum(paint, _stripe(d, centre, half) * within)
    return paint * on_road


def layout(scene: SceneSpec, x, y) -> np.ndarray:
    """RGB colour of the painted ground at world points; shape (..., 3), values in [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = y - scene.centerline(x)
    road = _ramp(scene.road_half_width - np.abs(d))[..., None]
    base = road * np.asarray(scene.asphalt) + (1 - road) * np.asarray(scene.verge)
    base = base * (1 + texture(scene.texture_seed, x, y))[..., None]
    paint = paint_mask(scene, x, y)[..., None]
    return np.clip(base * (1 - paint) + paint * np.asarray(scene.paint), 0.0, 1.0)


def vehicle_path(scene: SceneSpec, s: float) -> tuple[float, float, float]:
    """Pose (x, y, yaw) after driving ``s`` metres along the lane the vehicle starts in."""
    x = s
    y = 0.5 * scene.curvature * x * x
    return x, y, math.atan(scene.curvature * x)


@dataclass(frozen=True)
class SceneRandomization:
    half_width: tuple[float, float] = (3.5, 6.0)
    lanes: tuple[int, int] = (1, 3)
    dash_period: tuple[float, float] = (3.0, 6.0)
    dash_duty: tuple[float, float] = (0.35, 0.65)
    curvature: tuple[float, float] = (-0.008, 0.008)
    stop_line_prob: float = 0.3
    zigzag_prob: float = 0.2
    object_prob: float = 0.7
    max_objects: int = 3
    moving_prob: float = 0.5
    gain: tuple[float, float] = (0.9, 1.1)  # scene exposure
    offset: tuple[float, float] = (-0.03, 0.03)
    gain_jitter: float = 0.05  # relative frame-to-frame exposure drift
    offset_jitter: float = 0.01
    overexposure_prob: float = 0.2
    speed: tuple[float, float] = (1.2, 1.8)  # metres per frame
    lateral_slope: float = 0.0

    @classmethod
    def from_dict(cls, d: dict) -> "SceneRandomization":
        kw = {}
        for k, f in cls.__dataclass_fields__.items():
            if k in d:
                v = d[k]
                kw[k] = tuple(v) if isinstance(v, (list, tuple)) else v
        return cls(**kw)


def random_color(rng) -> tuple[float, float, float]:
    """A saturated colour well away from asphalt grey."""
    hue = rng.uniform(0, 1)
    rgb = np.clip(np.abs(np.mod(hue * 6 + np.array([0.0, 4.0, 2.0]), 6) - 3) - 1, 0, 1)
    value = rng.uniform(0.6, 0.95)
    return tuple(float(c) for c in 0.1 + (value - 0.1) * rgb)


def random_scene(rng: np.random.Generator, cfg: SceneRandomization = SceneRandomization(),
                 n_frames: int = 16, image_height: int = 96) -> tuple[SceneSpec, float]:
    """Draw a scene and the vehicle speed (metres per frame)."""
    hw = rng.uniform(*cfg.half_width)
    lanes = int(rng.integers(cfg.lanes[0], cfg.lanes[1] + 1))
    lane_w = 2 * hw / lanes
    ego_d = -hw + lane_w / 2 if lanes > 1 else 0.0  # keep to the rightmost lane
    curvature = rng.uniform(*cfg.curvature)
    speed = rng.uniform(*cfg.speed)
    offset = -ego_d

    objects = []
    if rng.random() < cfg.object_prob:
        for _ in range(int(rng.integers(1, cfg.max_objects + 1))):
            length, width, height = rng.uniform(1.5, 4.5), rng.uniform(1.0, 2.0), rng.uniform(0.8, 2.2)
            # stay clear of the ego corridor so the camera never drives into a box
            lo = 1.5 + width / 2
            hi = hw - width / 2 - 0.05
            side_room = [(ego_d + lo, hw - width / 2 - 0.05), (-hi, ego_d - lo)]
            side_room = [r for r in side_room if r[1] > r[0]]
            if not side_room:
                continue
            a, b = side_room[int(rng.integers(len(side_room)))]
            x = rng.uniform(5.0, 15.0)
            d = rng.uniform(a, b)
            moving = rng.random() < cfg.moving_prob
            vx = rng.uniform(0.5, 1.5) * speed if moving else 0.0
            y = offset + 0.5 * curvature * x * x + d
            objects.append(BoxObject(x=x, y=y, length=length, width=width, height=height,
                                     color=random_color(rng), vx=vx))

    overexposure = None
    if rng.random() < cfg.overexposure_prob:
        r0 = rng.uniform(0.2, 0.6) * image_height
        overexposure = (r0, r0 + rng.uniform(0.1, 0.3) * image_height, rng.uniform(0.2, 0.5))
    gain, bias = rng.uniform(*cfg.gain), rng.uniform(*cfg.offset)
    illumination = Illumination(
        gains=tuple(float(gain * (1 + j)) for j in rng.uniform(-cfg.gain_jitter, cfg.gain_jitter, n_frames)),
        offsets=tuple(float(bias + j) for j in rng.uniform(-cfg.offset_jitter, cfg.offset_jitter, n_frames)),
        overexposure=overexposure)

    grey = rng.uniform(0.22, 0.4)
    verge = (rng.uniform(0.2, 0.4), rng.uniform(0.3, 0.5), rng.uniform(0.15, 0.3))
    scene = SceneSpec(
        road_half_width=hw, lane_count=lanes,
        dash_period=rng.uniform(*cfg.dash_period), dash_duty=rng.uniform(*cfg.dash_duty),
        solid_edges=bool(rng.random() < 0.8),
        stop_line_x=float(rng.uniform(8.0, 15.0)) if rng.random() < cfg.stop_line_prob else None,
        zigzag=(float(rng.uniform(4.0, 8.0)), float(rng.uniform(10.0, 16.0))) if rng.random() < cfg.zigzag_prob else None,
        curvature=curvature, road_offset=offset, texture_seed=int(rng.integers(2 ** 31)),
        objects=tuple(objects), illumination=illumination, lateral_slope=cfg.lateral_slope,
        asphalt=(grey, grey, grey + 0.02), verge=verge)
    return scene, speed
