#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Run:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from cathnav import _kernels_np, kernels
from cathnav.imaging import thin


def timeit(fn, repeats=20):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def catheter_polyline(n=120):
    x = np.linspace(40.0, 700.0, n)
    y = 360.0 + 30.0 * np.sin(x / 150.0)
    return np.stack([x, y], axis=1)


def thin_with(backend, grid):
    out = grid.copy()
    changed = True
    while changed:
        changed = False
        for parity in (0, 1):
            mask = np.asarray(backend.thin_subpass_mask(out, parity), dtype=bool)
            if mask.any():
                out[mask] = 0
                changed = True
    return out


def main():
    if kernels.BACKEND != "compiled":
        print("compiled extension not available; benchmarking fallback only")

    pts = catheter_polyline()
    shifted = np.ascontiguousarray(pts - 0.5)

    rows = []

    t_np = timeit(lambda: _kernels_np.rasterize_tube(720, 960, shifted, 3.0))
    if kernels.BACKEND == "compiled":
        from cathnav import _speedups
        t_c = timeit(lambda: _speedups.rasterize_tube(720, 960, shifted, 3.0))
    else:
        t_c = float("nan")
    rows.append(("rasterize_tube 960x720", t_np, t_c))

    mask = kernels.rasterize_tube(720, 960, pts, 3.0)
    ys, xs = np.nonzero(mask)
    crop = np.ascontiguousarray(
        mask[ys.min() - 1:ys.max() + 2, xs.min() - 1:xs.max() + 2])

    t_np = timeit(lambda: thin_with(_kernels_np, crop.copy()), repeats=5)
    if kernels.BACKEND == "compiled":
        from cathnav import _speedups
        t_c = timeit(lambda: thin_with(_speedups, crop.copy()), repeats=5)
    else:
        t_c = float("nan")
    rows.append((f"thin loop {crop.shape[0]}x{crop.shape[1]}", t_np, t_c))

    t_np = timeit(lambda: thin(mask), repeats=5)
    rows.append(("imaging.thin full frame (dispatched)", t_np, float("nan")))

    print(f"backend selected at import: {kernels.BACKEND}\n")
    print(f"{'kernel':<40} {'numpy':>10} {'compiled':>10} {'speedup':>9}")
    for name, t_np, t_c in rows:
        if np.isnan(t_c):
            print(f"{name:<40} {t_np * 1e3:9.2f}ms {'-':>10} {'-':>9}")
        else:
            print(f"{name:<40} {t_np * 1e3:9.2f}ms {t_c * 1e3:9.2f}ms "
                  f"{t_np / t_c:8.1f}x")


if __name__ == "__main__":
    main()
