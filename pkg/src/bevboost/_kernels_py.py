"""Pure-numpy bilinear grid sampling; same contract as the compiled kernels."""
from __future__ import annotations

import numpy as np


def _corners(grid, H, W):
    dtype = grid.dtype
    px = (grid[..., 0] + 1) * dtype.type(0.5 * (W - 1))
    py = (grid[..., 1] + 1) * dtype.type(0.5 * (H - 1))
    px = np.clip(np.nan_to_num(px, nan=-2.0), -2, W + 1)
    py = np.clip(np.nan_to_num(py, nan=-2.0), -2, H + 1)
    eps = np.finfo(dtype).eps
    # snap round-off so grids that hit pixel centres copy exactly
    rx, ry = np.round(px), np.round(py)
    px = np.where(np.abs(px - rx) < 8 * eps * (W + 1), rx, px)
    py = np.where(np.abs(py - ry) < 8 * eps * (H + 1), ry, py)
    x0 = np.floor(px)
    y0 = np.floor(py)
    fx = (px - x0).astype(dtype)
    fy = (py - y0).astype(dtype)
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    out = []
    for dy, dx in ((0, 0), (0, 1), (1, 0), (1, 1)):
        xi, yi = x0 + dx, y0 + dy
        valid = (xi >= 0) & (xi < W) & (yi >= 0) & (yi < H)
        flat = np.where(valid, yi * W + xi, 0)
        out.append((flat, valid))
    return out, fx, fy


def _weights(fx, fy):
    return ((1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy)


def grid_sample_forward(inp: np.ndarray, grid: np.ndarray) -> np.ndarray:
    C, H, W = inp.shape
    corners, fx, fy = _corners(grid, H, W)
    flat_in = inp.reshape(C, H * W)
    out = np.zeros((C,) + grid.shape[:2], dtype=inp.dtype)
    for (idx, valid), w in zip(corners, _weights(fx, fy)):
        out += flat_in[:, idx] * (w * valid)
    return out


def grid_sample_backward(inp: np.ndarray, grid: np.ndarray, gout: np.ndarray):
    C, H, W = inp.shape
    corners, fx, fy = _corners(grid, H, W)
    flat_in = inp.reshape(C, H * W)
    vals = [flat_in[:, idx] * valid for idx, valid in corners]
    a00, a01, a10, a11 = vals
    dx = (gout * ((1 - fy) * (a01 - a00) + fy * (a11 - a10))).sum(axis=0)
    dy = (gout * ((1 - fx) * (a10 - a00) + fx * (a11 - a01))).sum(axis=0)
    ggrid = np.stack([dx * (0.5 * (W - 1)), dy * (0.5 * (H - 1))], axis=-1).astype(inp.dtype)

    offsets = (np.arange(C) * (H * W))[:, None]
    gin = np.zeros(C * H * W, dtype=np.float64)
    for (idx, valid), w in zip(corners, _weights(fx, fy)):
        contrib = gout * (w * valid)
        gin += np.bincount((offsets + idx.ravel()[None, :]).ravel(), weights=contrib.reshape(C, -1).ravel(),
                           minlength=C * H * W)
    return gin.reshape(C, H, W).astype(inp.dtype), ggrid
