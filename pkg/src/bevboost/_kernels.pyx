# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled bilinear grid-sampling kernels (zero padding, align-corners grid).

Arrays are channel-first: input (C, H, W), grid (Ho, Wo, 2) in [-1, 1].
Loops run in a fixed order so results do not depend on scheduling.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, fabs, round as cround

ctypedef fused real:
    float
    double


def grid_sample_forward(real[:, :, ::1] inp, real[:, :, ::1] grid):
    cdef Py_ssize_t C = inp.shape[0], H = inp.shape[1], W = inp.shape[2]
    cdef Py_ssize_t Ho = grid.shape[0], Wo = grid.shape[1]
    dtype = np.float32 if real is float else np.float64
    out_arr = np.zeros((C, Ho, Wo), dtype=dtype)
    cdef real[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, c, x0, y0, x1, y1
    cdef real px, py, fx, fy, w00, w01, w10, w11, acc
    cdef bint v00, v01, v10, v11
    cdef real sx = 0.5 * (W - 1), sy = 0.5 * (H - 1)
    cdef double eps = 1.2e-7 if real is float else 2.3e-16
    cdef real tolx = 8 * eps * (W + 1), toly = 8 * eps * (H + 1)
    with nogil:
        for i in range(Ho):
            for j in range(Wo):
                px = (grid[i, j, 0] + 1) * sx
                py = (grid[i, j, 1] + 1) * sy
                # keeps the integer cast defined; anything clamped is fully padded
                if not px >= -2:
                    px = -2
                elif px > W + 1:
                    px = W + 1
                if not py >= -2:
                    py = -2
                elif py > H + 1:
                    py = H + 1
                # snap round-off so grids that hit pixel centres copy exactly
                if fabs(px - cround(px)) < tolx:
                    px = cround(px)
                if fabs(py - cround(py)) < toly:
                    py = cround(py)
                x0 = <Py_ssize_t>floor(px)
                y0 = <Py_ssize_t>floor(py)
                x1 = x0 + 1
                y1 = y0 + 1
                fx = px - x0
                fy = py - y0
                v00 = 0 <= x0 < W and 0 <= y0 < H
                v01 = 0 <= x1 < W and 0 <= y0 < H
                v10 = 0 <= x0 < W and 0 <= y1 < H
                v11 = 0 <= x1 < W and 0 <= y1 < H
                if not (v00 or v01 or v10 or v11):
                    continue
                w00 = (1 - fx) * (1 - fy)
                w01 = fx * (1 - fy)
                w10 = (1 - fx) * fy
                w11 = fx * fy
                for c in range(C):
                    acc = 0
                    if v00:
                        acc = acc + w00 * inp[c, y0, x0]
                    if v01:
                        acc = acc + w01 * inp[c, y0, x1]
                    if v10:
                        acc = acc + w10 * inp[c, y1, x0]
                    if v11:
                        acc = acc + w11 * inp[c, y1, x1]
                    out[c, i, j] = acc
    return out_arr


def grid_sample_backward(real[:, :, ::1] inp, real[:, :, ::1] grid, real[:, :, ::1] gout):
    cdef Py_ssize_t C = inp.shape[0], H = inp.shape[1], W = inp.shape[2]
    cdef Py_ssize_t Ho = grid.shape[0], Wo = grid.shape[1]
    dtype = np.float32 if real is float else np.float64
    gin_arr = np.zeros((C, H, W), dtype=dtype)
    ggrid_arr = np.zeros((Ho, Wo, 2), dtype=dtype)
    cdef real[:, :, ::1] gin = gin_arr
    cdef real[:, :, ::1] ggrid = ggrid_arr
    cdef Py_ssize_t i, j, c, x0, y0, x1, y1
    cdef real px, py, fx, fy, g, a00, a01, a10, a11, dx, dy
    cdef bint v00, v01, v10, v11
    cdef real sx = 0.5 * (W - 1), sy = 0.5 * (H - 1)
    cdef double eps = 1.2e-7 if real is float else 2.3e-16
    cdef real tolx = 8 * eps * (W + 1), toly = 8 * eps * (H + 1)
    with nogil:
        for i in range(Ho):
            for j in range(Wo):
                px = (grid[i, j, 0] + 1) * sx
                py = (grid[i, j, 1] + 1) * sy
                # keeps the integer cast defined; anything clamped is fully padded
                if not px >= -2:
                    px = -2
                elif px > W + 1:
                    px = W + 1
                if not py >= -2:
                    py = -2
                elif py > H + 1:
                    py = H + 1
                # snap round-off so grids that hit pixel centres copy exactly
                if fabs(px - cround(px)) < tolx:
                    px = cround(px)
                if fabs(py - cround(py)) < toly:
                    py = cround(py)
                x0 = <Py_ssize_t>floor(px)
                y0 = <Py_ssize_t>floor(py)
                x1 = x0 + 1
                y1 = y0 + 1
                fx = px - x0
                fy = py - y0
                v00 = 0 <= x0 < W and 0 <= y0 < H
                v01 = 0 <= x1 < W and 0 <= y0 < H
                v10 = 0 <= x0 < W and 0 <= y1 < H
                v11 = 0 <= x1 < W and 0 <= y1 < H
                if not (v00 or v01 or v10 or v11):
                    continue
                dx = 0
                dy = 0
                for c in range(C):
                    g = gout[c, i, j]
                    a00 = inp[c, y0, x0] if v00 else 0
                    a01 = inp[c, y0, x1] if v01 else 0
                    a10 = inp[c, y1, x0] if v10 else 0
                    a11 = inp[c, y1, x1] if v11 else 0
                    dx = dx + g * ((1 - fy) * (a01 - a00) + fy * (a11 - a10))
                    dy = dy + g * ((1 - fx) * (a10 - a00) + fx * (a11 - a01))
                    if v00:
                        gin[c, y0, x0] += (1 - fx) * (1 - fy) * g
                    if v01:
                        gin[c, y0, x1] += fx * (1 - fy) * g
                    if v10:
                        gin[c, y1, x0] += (1 - fx) * fy * g
                    if v11:
                        gin[c, y1, x1] += fx * fy * g
                ggrid[i, j, 0] = dx * sx
                ggrid[i, j, 1] = dy * sy
    return gin_arr, ggrid_arr
