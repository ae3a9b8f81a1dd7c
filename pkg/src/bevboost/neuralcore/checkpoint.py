"""Checkpoint files.

Layout::

    b"BEVF0001"                      magic + format version
    uint32 little-endian             manifest length in bytes
    manifest                         UTF-8 JSON: {"meta": {...}, "blocks": [{"name", "shape"}, ...]}
    float32 little-endian blocks     one per manifest entry, in manifest order
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"BEVF0001"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path: str | Path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    blocks = [{"name": k, "shape": list(np.shape(v))} for k, v in arrays.items()]
    manifest = json.dumps({"meta": meta or {}, "blocks": blocks}, sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(manifest)))
        fh.write(manifest)
        for v in arrays.values():
            fh.write(np.ascontiguousarray(v, dtype="<f4").tobytes())
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: expected magic {MAGIC!r}, found {raw[:8]!r}")
    (n,) = struct.unpack("<I", raw[8:12])
    manifest = json.loads(raw[12:12 + n])
    offset = 12 + n
    arrays = {}
    for block in manifest["blocks"]:
        shape = tuple(block["shape"])
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
        arrays[block["name"]] = data.reshape(shape).astype(np.float32)
        offset += 4 * count
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")
    return arrays, manifest["meta"]
