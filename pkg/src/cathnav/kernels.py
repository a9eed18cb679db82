"""Kernel dispatch: compiled extension when available, NumPy otherwise.

``BACKEND`` reports which implementation was selected at import time;
``benchmarks/bench_kernels.py`` compares the two.
"""

import numpy as np

from . import _kernels_np

try:
    from . import _speedups

    _impl = _speedups
    BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on the build environment
    _impl = _kernels_np
    BACKEND = "numpy"


def thin_subpass_mask(grid, parity):
    """Deletion mask (bool) for one thinning subpass on a 0/1 uint8 grid."""
    grid = np.ascontiguousarray(grid, dtype=np.uint8)
    return np.asarray(_impl.thin_subpass_mask(grid, int(parity)), dtype=bool)


def rasterize_tube(height, width, points, radius):
    """uint8 mask of pixels within ``radius`` of the (x, y) polyline.

    Pixel (row, col) covers the unit square with center (col+0.5, row+0.5),
    so a radius-r tube is 2r pixels wide, not 2r+1.
    """
    pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64) - 0.5
    return _impl.rasterize_tube(int(height), int(width), pts, float(radius))


def numpy_backend():
    """The pure-NumPy module (exposed for benchmarking and tests)."""
    return _kernels_np
