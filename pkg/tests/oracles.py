"""Independent reference implementations used only by the tests.

None of these call into the package's geometry/warp code paths.
"""
import math

import numpy as np


def rodrigues(v, k, angle):
    v = np.asarray(v, float)
    k = np.asarray(k, float) / np.linalg.norm(k)
    return v * math.cos(angle) + np.cross(k, v) * math.sin(angle) + k * np.dot(k, v) * (1 - math.cos(angle))


def camera_axes(pitch, roll=0.0, yaw=0.0):
    """Right, down and optical-axis unit vectors, built by rotating a level camera."""
    axis = np.array([1.0, 0.0, 0.0])
    right = np.array([0.0, -1.0, 0.0])
    down = np.array([0.0, 0.0, -1.0])
    axis = rodrigues(axis, right, -pitch)
    down = rodrigues(down, right, -pitch)
    right, down = rodrigues(right, axis, roll), rodrigues(down, axis, roll)
    up = np.array([0.0, 0.0, 1.0])
    return rodrigues(right, up, yaw), rodrigues(down, up, yaw), rodrigues(axis, up, yaw)


def march_to_ground(fx, fy, cx, cy, h, pitch, u, v, roll=0.0, yaw=0.0, iters=200):
    """Walk the back-projected ray until it crosses z = 0, then bisect."""
    right, down, axis = camera_axes(pitch, roll, yaw)
    d = axis + right * (u - cx) / fx + down * (v - cy) / fy
    c = np.array([0.0, 0.0, h])
    if d[2] >= 0:
        return None
    lo, hi = 0.0, 1.0
    while (c + hi * d)[2] > 0:
        lo, hi = hi, hi * 2
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if (c + mid * d)[2] > 0:
            lo = mid
        else:
            hi = mid
    p = c + 0.5 * (lo + hi) * d
    return p[0], p[1]


def ground_to_pixel(fx, fy, cx, cy, h, pitch, x, y, roll=0.0, yaw=0.0):
    right, down, axis = camera_axes(pitch, roll, yaw)
    rel = np.array([x, y, -h])
    z = rel @ axis
    return cx + fx * (rel @ right) / z, cy + fy * (rel @ down) / z


def bev_pixel_to_ground(col, row, x_max, width, mpp):
    return x_max - (row + 0.5) * mpp, (width / 2 - col - 0.5) * mpp


def bilinear_scalar(img, xs, ys):
    """Scalar bilinear sample of an (H, W, C) image at normalized (xs, ys), zero padding."""
    H, W, C = img.shape
    px = (xs + 1) / 2 * (W - 1)
    py = (ys + 1) / 2 * (H - 1)
    x0, y0 = math.floor(px), math.floor(py)
    out = np.zeros(C)
    for yy in (y0, y0 + 1):
        for xx in (x0, x0 + 1):
            wx = 1 - abs(px - xx)
            wy = 1 - abs(py - yy)
            if 0 <= xx < W and 0 <= yy < H:
                out += wx * wy * img[yy, xx].astype(np.float64)
    return out


def se2(x, y, yaw):
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, x], [s, c, y], [0, 0, 1.0]])


def central_difference(f, x, eps):
    """Gradient of scalar f at array x by central differences."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        fp = f(x)
        x[i] = old - eps
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * eps)
    return g


def adam_scalar(grad_fn, x0, lr, steps, b1=0.9, b2=0.999, eps=1e-8):
    x, m, v = float(x0), 0.0, 0.0
    traj = []
    for t in range(1, steps + 1):
        g = grad_fn(x)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1 ** t)
        vh = v / (1 - b2 ** t)
        x = x - lr * mh / (math.sqrt(vh) + eps)
        traj.append(x)
    return traj


def conv_same_scalar(img, weight, bias):
    """Naive 'same' cross-correlation, img (C, H, W), weight (O, C, k, k)."""
    o, c, k, _ = weight.shape
    pad = (k - 1) // 2
    _, h, w = img.shape
    out = np.zeros((o, h, w))
    for oc in range(o):
        for r in range(h):
            for q in range(w):
                acc = float(bias[oc])
                for ic in range(c):
                    for i in range(k):
                        for j in range(k):
                            rr, qq = r + i - pad, q + j - pad
                            if 0 <= rr < h and 0 <= qq < w:
                                acc += float(weight[oc, ic, i, j]) * float(img[ic, rr, qq])
                out[oc, r, q] = acc
    return out


def pool2_scalar(img):
    c, h, w = img.shape
    out = np.zeros((c, h // 2, w // 2))
    for ch in range(c):
        for r in range(h // 2):
            for q in range(w // 2):
                out[ch, r, q] = (img[ch, 2 * r, 2 * q] + img[ch, 2 * r + 1, 2 * q]
                                 + img[ch, 2 * r, 2 * q + 1] + img[ch, 2 * r + 1, 2 * q + 1]) / 4
    return out


def perceptual_scalar(layers, label, fake):
    """layers: list of (weight, bias); images (C, H, W).  Layer-weighted mean |diff| of relu taps."""
    n = len(layers)
    total = 0.0
    a, b = np.asarray(label, float), np.asarray(fake, float)
    for i, (w, bias) in enumerate(layers):
        if i:
            a, b = pool2_scalar(a), pool2_scalar(b)
        a = np.maximum(conv_same_scalar(a, w, bias), 0)
        b = np.maximum(conv_same_scalar(b, w, bias), 0)
        total += np.abs(a - b).mean() / 2 ** (n - 1 - i)
    return total


def first_hit(fx, fy, cx, cy, h, pitch, u, v, boxes, step=0.002, t_max=80.0):
    """March a camera ray (identity vehicle pose) in small steps; return the index of the
    first box entered, -1 for the ground, -2 if nothing is hit.  boxes: (x0, x1, y0, y1, z0, z1)."""
    right, down, axis = camera_axes(pitch)
    d = axis + right * (u - cx) / fx + down * (v - cy) / fy
    d = d / np.linalg.norm(d)
    c = np.array([0.0, 0.0, h])
    for t in np.arange(step, t_max, step):
        p = c + t * d
        for k, (x0, x1, y0, y1, z0, z1) in enumerate(boxes):
            if x0 <= p[0] <= x1 and y0 <= p[1] <= y1 and z0 <= p[2] <= z1:
                return k
        if p[2] <= 0:
            return -1
    return -2
