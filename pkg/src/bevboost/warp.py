"""Differentiable bilinear grid sampling and homography warps.

Images are ``(H, W, C)`` float arrays.  Sampling grids are ``(Ho, Wo, 2)``
arrays of normalized source coordinates, ``-1``/``+1`` being the centres of
the first/last pixel on each axis.  Samples outside the input read zeros.
"""
from __future__ import annotations

import numpy as np

from . import kernels
from .geometry import GeometryError, normalize_homography, to_normalized


class NearZeroDivide(GeometryError):
    pass


def normalized_axis(n: int) -> np.ndarray:
    return np.linspace(-1.0, 1.0, n) if n > 1 else np.zeros(1)


def build_grid(m_loc: np.ndarray, out_h: int, out_w: int, dtype=np.float64) -> np.ndarray:
    """Source coordinates ``divide(m_loc @ [x, y, 1])`` for every output pixel."""
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be at least 1x1")
    m = np.asarray(m_loc, dtype=np.float64)
    xs = normalized_axis(out_w)[None, :]
    ys = normalized_axis(out_h)[:, None]
    u = m[0, 0] * xs + m[0, 1] * ys + m[0, 2]
    v = m[1, 0] * xs + m[1, 1] * ys + m[1, 2]
    w = m[2, 0] * xs + m[2, 1] * ys + m[2, 2]
    if np.any(np.abs(w) < 1e-8):
        raise NearZeroDivide("homogeneous w-component vanishes inside the output raster")
    return np.stack([u / w, v / w], axis=-1).astype(dtype)


def build_grid_backward(m_loc: np.ndarray, out_h: int, out_w: int, grad_grid: np.ndarray) -> np.ndarray:
    """Gradient of a scalar loss w.r.t. the 9 entries of ``m_loc``."""
    m = np.asarray(m_loc, dtype=np.float64)
    xs = np.broadcast_to(normalized_axis(out_w)[None, :], (out_h, out_w))
    ys = np.broadcast_to(normalized_axis(out_h)[:, None], (out_h, out_w))
    w = m[2, 0] * xs + m[2, 1] * ys + m[2, 2]
    sx = (m[0, 0] * xs + m[0, 1] * ys + m[0, 2]) / w
    sy = (m[1, 0] * xs + m[1, 1] * ys + m[1, 2]) / w
    gx = grad_grid[..., 0].astype(np.float64) / w
    gy = grad_grid[..., 1].astype(np.float64) / w
    gw = -(gx * sx + gy * sy)
    basis = (xs, ys, 1.0)
    out = np.empty((3, 3))
    for row, g in enumerate((gx, gy, gw)):
        for col, b in enumerate(basis):
            out[row, col] = np.sum(g * b)
    return out


def _chw(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim == 2:
        img = img[:, :, None]
    return np.ascontiguousarray(np.moveaxis(img, -1, 0))


def grid_sample_forward(inp: np.ndarray, grid: np.ndarray) -> np.ndarray:
    out = kernels.grid_sample_chw(_chw(inp), grid)
    return np.moveaxis(out, 0, -1)


def grid_sample_backward(inp: np.ndarray, grid: np.ndarray, grad_output: np.ndarray):
    gin, ggrid = kernels.grid_sample_chw_backward(_chw(inp), grid, _chw(grad_output))
    gin = np.moveaxis(gin, 0, -1)
    if np.asarray(inp).ndim == 2:
        gin = gin[..., 0]
    return gin, ggrid


def warp_image(inp: np.ndarray, h: np.ndarray, out_h: int, out_w: int, normalized: bool = False) -> np.ndarray:
    """Inverse-warp ``inp``: output pixel p samples the input at ``h @ p``.

    ``h`` is in pixel coordinates unless ``normalized`` is set.
    """
    inp = np.asarray(inp)
    squeeze = inp.ndim == 2
    if not normalized:
        h = to_normalized(h, (inp.shape[1], inp.shape[0]), (out_w, out_h))
    grid = build_grid(normalize_homography(h), out_h, out_w, dtype=np.float64)
    out = grid_sample_forward(inp.astype(np.float64), grid)
    out = out.astype(inp.dtype if inp.dtype.kind == "f" else np.float64)
    return out[..., 0] if squeeze else out


def valid_mask(in_h: int, in_w: int, h: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Output pixels whose pixel-frame sample point lies inside the input raster."""
    hh = np.asarray(h, dtype=np.float64)
    cols, rows = np.meshgrid(np.arange(out_w, dtype=np.float64), np.arange(out_h, dtype=np.float64))
    w = hh[2, 0] * cols + hh[2, 1] * rows + hh[2, 2]
    u = (hh[0, 0] * cols + hh[0, 1] * rows + hh[0, 2]) / w
    v = (hh[1, 0] * cols + hh[1, 1] * rows + hh[1, 2]) / w
    return (w > 0) & (u >= 0) & (u <= in_w - 1) & (v >= 0) & (v <= in_h - 1)
