"""Loader stub for real drives in the Oxford RobotCar layout.

No data ships with the package.  Expected directory layout::

    <root>/stereo/centre/<timestamp>.png   demosaiced front-camera frames
    <root>/vo/vo.csv                       relative visual odometry, columns
        source_timestamp,destination_timestamp,x,y,z,roll,pitch,yaw

Each VO row is the motion from ``destination_timestamp`` to
``source_timestamp``; chaining the rows gives every frame's pose relative to
the first one.  Only the planar part (x, y, yaw) is kept.
"""
from __future__ import annotations

import csv
from pathlib import Path

from ..geometry import PosePlanar
from .io import load_png
from .stitch import SequenceFrame

VO_COLUMNS = ["source_timestamp", "destination_timestamp", "x", "y", "z", "roll", "pitch", "yaw"]


def check_layout(root) -> tuple[Path, Path]:
    root = Path(root)
    images, vo = root / "stereo" / "centre", root / "vo" / "vo.csv"
    missing = [str(p) for p in (images, vo) if not p.exists()]
    if missing:
        raise FileNotFoundError("RobotCar layout incomplete, missing: " + ", ".join(missing))
    return images, vo


def read_vo(path) -> list[tuple[int, PosePlanar]]:
    """Chained planar poses keyed by timestamp, starting at the identity."""
    out = []
    pose = PosePlanar(0.0, 0.0, 0.0)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames[:len(VO_COLUMNS)] != VO_COLUMNS:
            raise ValueError(f"{path}: unexpected VO columns {reader.fieldnames}")
        for i, row in enumerate(reader):
            if i == 0:
                out.append((int(row["destination_timestamp"]), pose))
            step = PosePlanar(float(row["x"]), float(row["y"]), float(row["yaw"]))
            pose = pose.compose(step)
            out.append((int(row["source_timestamp"]), pose))
    return out


def load_robotcar_sequence(root, start: int = 0, count: int | None = None) -> list[SequenceFrame]:
    images, vo = check_layout(root)
    chain = read_vo(vo)[start:None if count is None else start + count]
    if not chain:
        return []
    t0, p0 = chain[0]
    inv0 = p0.inverse()
    return [SequenceFrame(load_png(images / f"{ts}.png"), inv0.compose(p), (ts - t0) * 1e-6) for ts, p in chain]
