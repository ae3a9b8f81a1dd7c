"""Compiled vs numpy grid sampler: ``python3 benchmarks/bench_kernels.py [--repeat N]``.

Times the forward and backward bilinear sampler on two workloads, a frontal
image warped to the BEV raster and a bottleneck feature map, after checking
that both backends agree.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from bevboost import _kernels_py
from bevboost.geometry import derive_ground_homography, to_normalized
from bevboost.presets import desk_rig, desk_spec
from bevboost.warp import build_grid

try:
    from bevboost import _kernels
except ImportError:  # extension not built
    _kernels = None

WORKLOADS = {
    # name: (channels, in_h, in_w, out_h, out_w, dtype)
    "image 3x96x128 f64": (3, 96, 128, 96, 128, np.float64),
    "features 128x6x8 f32": (128, 6, 8, 6, 8, np.float32),
    "features 16x96x128 f32": (16, 96, 128, 96, 128, np.float32),
}


def workload(c, in_h, in_w, out_h, out_w, dtype, rng):
    h = to_normalized(derive_ground_homography(desk_rig(), desk_spec()), (128, 96), (128, 96))
    grid = build_grid(h, out_h, out_w).astype(dtype)
    inp = rng.standard_normal((c, in_h, in_w)).astype(dtype)
    gout = rng.standard_normal((c, out_h, out_w)).astype(dtype)
    return inp, grid, gout


def best_of(fn, repeat):
    t = timeit.Timer(fn)
    n, _ = t.autorange()
    return min(t.repeat(repeat=repeat, number=n)) / n


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernels are not built; only the numpy fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'workload':24s} {'pass':8s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, spec in WORKLOADS.items():
        inp, grid, gout = workload(*spec, rng)
        for label, call in (("forward", lambda k: k.grid_sample_forward(inp, grid)),
                            ("backward", lambda k: k.grid_sample_backward(inp, grid, gout))):
            t_py = best_of(lambda: call(_kernels_py), args.repeat)
            if _kernels is None:
                print(f"{name:24s} {label:8s} {1e3 * t_py:10.3f} {'-':>10s} {'-':>8s}")
                continue
            ref, fast = call(_kernels_py), call(_kernels)
            # the compiled kernel forms sample coordinates in double, numpy in the input precision
            tol = 1e-4 if inp.dtype == np.float32 else 1e-10
            for a, b in zip(ref if isinstance(ref, tuple) else (ref,), fast if isinstance(fast, tuple) else (fast,)):
                assert np.abs(b - a).max() <= tol * max(np.abs(a).max(), 1.0), f"{name} {label}: backends disagree"
            t_cy = best_of(lambda: call(_kernels), args.repeat)
            print(f"{name:24s} {label:8s} {1e3 * t_py:10.3f} {1e3 * t_cy:10.3f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
