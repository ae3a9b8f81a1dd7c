"""Differentiable ops on NCHW tensors.  Every op keeps the input dtype."""
from __future__ import annotations

import numpy as np

from .. import kernels
from ..warp import build_grid, build_grid_backward
from .tensor import Tensor, as_tensor, make


def add(a: Tensor, b: Tensor) -> Tensor:
    return make(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    return make(a.data - b.data, (a, b), lambda g: (g, -g))


def scale(a: Tensor, s: float) -> Tensor:
    s = a.dtype.type(s)
    return make(a.data * s, (a,), lambda g: (g * s,))


def add_scalar(a: Tensor, s: float) -> Tensor:
    return make(a.data + a.dtype.type(s), (a,), lambda g: (g,))


def weighted_sum(terms, weights) -> Tensor:
    """sum_i w_i * t_i over scalar (or same-shape) tensors."""
    terms = list(terms)
    weights = [float(w) for w in weights]
    if not terms:
        return Tensor(np.float32(0.0))
    dtype = terms[0].dtype
    out = sum(w * t.data.astype(np.float64) for w, t in zip(weights, terms))  # one rounding at the end
    return make(np.asarray(out, dtype=dtype), terms, lambda g: tuple(g * dtype.type(w) for w in weights))


def concat(tensors, axis: int = 1) -> Tensor:
    tensors = list(tensors)
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return make(np.concatenate([t.data for t in tensors], axis=axis), tensors,
                lambda g: tuple(np.split(g, sizes, axis=axis)))


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    slope = x.dtype.type(slope)
    pos = x.data > 0
    return make(np.where(pos, x.data, x.data * slope), (x,), lambda g: (np.where(pos, g, g * slope),))


def relu(x: Tensor) -> Tensor:
    return leaky_relu(x, 0.0)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return make(y, (x,), lambda g: (g * (1 - y * y),))


def tanh_out(x: Tensor) -> Tensor:
    return tanh(x)


def _pad(x: np.ndarray, pad: int) -> np.ndarray:
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, pad: int = 0) -> Tensor:
    """Cross-correlation: x (N, C, H, W), weight (O, C, k, k)."""
    n, c, h, w = x.shape
    o, cw, kh, kw = weight.shape
    if cw != c:
        raise ValueError(f"conv2d: input has {c} channels, weight expects {cw}")
    xp = _pad(x.data, pad)
    hp, wp = xp.shape[2:]
    if kh > hp or kw > wp:
        raise ValueError("conv2d: kernel larger than padded input")
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    # channel-major columns (N, C, kh, kw, Ho, Wo): one strided copy per tap
    cols = np.empty((n, c, kh, kw, ho, wo), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride]
    cols = cols.reshape(n, c * kh * kw, ho * wo)
    w2 = weight.data.reshape(o, -1)
    out = np.matmul(w2, cols)
    if bias is not None:
        out += bias.data[:, None]
    out = out.reshape(n, o, ho, wo)

    def backward(g):
        g2 = g.reshape(n, o, ho * wo)
        gw = gb = gx = None
        if weight.requires_grad:
            gw = sum(g2[b] @ cols[b].T for b in range(n)).reshape(weight.shape)
        if bias is not None and bias.requires_grad:
            gb = g2.sum(axis=(0, 2))
        if x.requires_grad:
            gcols = np.matmul(w2.T, g2).reshape(n, c, kh, kw, ho, wo)
            gxp = np.zeros(xp.shape, dtype=x.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += gcols[:, :, i, j]
            gx = gxp[:, :, pad:pad + h, pad:pad + w] if pad else gxp
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make(out, parents, backward)


def instance_norm(x: Tensor, gain: Tensor | None = None, shift: Tensor | None = None, eps: float = 1e-5) -> Tensor:
    mu = x.data.mean(axis=(2, 3), keepdims=True)
    var = x.data.var(axis=(2, 3), keepdims=True)
    inv = 1.0 / np.sqrt(var + x.dtype.type(eps))
    xhat = (x.data - mu) * inv
    out = xhat
    if gain is not None:
        out = out * gain.data[None, :, None, None]
    if shift is not None:
        out = out + shift.data[None, :, None, None]

    parents = [x] + [p for p in (gain, shift) if p is not None]

    def backward(g):
        dxhat = g * gain.data[None, :, None, None] if gain is not None else g
        gx = inv * (dxhat - dxhat.mean(axis=(2, 3), keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=(2, 3), keepdims=True))
        res = [gx]
        if gain is not None:
            res.append((g * xhat).sum(axis=(0, 2, 3)))
        if shift is not None:
            res.append(g.sum(axis=(0, 2, 3)))
        return res

    return make(out.astype(x.dtype, copy=False), parents, backward)


def avg_downsample2x(x: Tensor) -> Tensor:
    n, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    if h2 == 0 or w2 == 0:
        raise ValueError("avg_downsample2x: input smaller than 2x2")
    crop = x.data[:, :, :2 * h2, :2 * w2]
    out = crop.reshape(n, c, h2, 2, w2, 2).mean(axis=(3, 5))
    quarter = x.dtype.type(0.25)

    def backward(g):
        gx = np.zeros(x.shape, dtype=x.dtype)
        up = np.repeat(np.repeat(g * quarter, 2, axis=2), 2, axis=3)
        gx[:, :, :2 * h2, :2 * w2] = up
        return (gx,)

    return make(out, (x,), backward)


def nearest_upsample2x(x: Tensor) -> Tensor:
    n, c, h, w = x.shape
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)
    return make(out, (x,), lambda g: (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),))


def global_avg_pool(x: Tensor) -> Tensor:
    n, c, h, w = x.shape
    inv = x.dtype.type(1.0 / (h * w))
    return make(x.data.mean(axis=(2, 3)), (x,),
                lambda g: (np.broadcast_to((g * inv)[:, :, None, None], x.shape).copy(),))


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """x (N, F_in), weight (F_out, F_in)."""
    if x.shape[-1] != weight.shape[1]:
        raise ValueError(f"linear: input has {x.shape[-1]} features, weight expects {weight.shape[1]}")
    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data

    def backward(g):
        gx = g @ weight.data if x.requires_grad else None
        gw = g.T @ x.data if weight.requires_grad else None
        gb = g.sum(axis=0) if bias is not None else None
        return gx, gw, gb

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make(out, parents, backward)


def perturbed_homography(theta: Tensor, reference: np.ndarray, step: float = 0.1) -> Tensor:
    """Per-sample ``reference @ (I + step * P(theta))`` with the (2, 2) entry of P fixed at 0.

    theta has shape (N, 8); the result has shape (N, 3, 3) and is kept in
    double precision whatever theta's dtype, so the reference chain survives
    exactly when theta is zero.
    """
    n = theta.shape[0]
    ref = np.asarray(reference, dtype=np.float64)
    pert = np.zeros((n, 9))
    pert[:, :8] = theta.data.astype(np.float64) * step
    pert = pert.reshape(n, 3, 3) + np.eye(3)
    out = ref @ pert

    def backward(g):
        gp = ref.T @ g.astype(np.float64)  # (N, 3, 3)
        return ((gp.reshape(n, 9)[:, :8] * step).astype(theta.dtype),)

    return make(out, (theta,), backward)


def homography_warp(x: Tensor, m: Tensor, out_h: int, out_w: int) -> Tensor:
    """Bilinear sampling of x (N, C, H, W) on grids built from per-sample m (N, 3, 3)."""
    n = x.shape[0]
    grids = [build_grid(m.data[i], out_h, out_w, dtype=x.dtype) for i in range(n)]
    out = np.stack([kernels.grid_sample_chw(x.data[i], grids[i]) for i in range(n)])

    def backward(g):
        gx = np.empty(x.shape, dtype=x.dtype)
        gm = np.empty(m.shape, dtype=m.dtype)
        for i in range(n):
            gin, ggrid = kernels.grid_sample_chw_backward(x.data[i], grids[i], np.ascontiguousarray(g[i]))
            gx[i] = gin
            gm[i] = build_grid_backward(m.data[i], out_h, out_w, ggrid)
        return gx, gm

    return make(out, (x, m), backward)


def grid_sample(x: Tensor, grid: Tensor) -> Tensor:
    """Bilinear sampling with an explicit (N, Ho, Wo, 2) grid."""
    n = x.shape[0]
    out = np.stack([kernels.grid_sample_chw(x.data[i], grid.data[i]) for i in range(n)])

    def backward(g):
        pairs = [kernels.grid_sample_chw_backward(x.data[i], grid.data[i], np.ascontiguousarray(g[i]))
                 for i in range(n)]
        return np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])

    return make(out.astype(x.dtype, copy=False), (x, grid), backward)


def mean_abs_diff(a: Tensor, b: Tensor) -> Tensor:
    """mean |a - b|, subgradient 0 where they are equal."""
    d = a.data - b.data
    inv = a.dtype.type(1.0 / d.size)
    s = np.sign(d) * inv
    return make(np.asarray(np.abs(d).mean(), dtype=a.dtype), (a, b), lambda g: (g * s, -g * s))


def mean_square_to(a: Tensor, target: float) -> Tensor:
    """mean (a - target)^2."""
    d = a.data - a.dtype.type(target)
    k = a.dtype.type(2.0 / d.size)
    return make(np.asarray(np.mean(d * d), dtype=a.dtype), (a,), lambda g: (g * k * d,))


def mean_bce_logits(a: Tensor, target: float) -> Tensor:
    """mean binary cross-entropy of logits a against a constant target in {0, 1}."""
    x = a.data
    t = a.dtype.type(target)
    val = np.maximum(x, 0) - x * t + np.log1p(np.exp(-np.abs(x)))
    sig = 1 / (1 + np.exp(-x))
    k = a.dtype.type(1.0 / x.size)
    return make(np.asarray(val.mean(), dtype=a.dtype), (a,), lambda g: (g * k * (sig - t),))


def constant(x) -> Tensor:
    return as_tensor(np.asarray(x, dtype=np.float32))
