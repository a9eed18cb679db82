"""NumPy reference implementations of the hot pixel kernels.

These are the fallback used when the compiled extension is unavailable;
results are bit-identical to ``_speedups``.
"""

import numpy as np


def thin_subpass_mask(grid, parity):
    """Deletion mask for one thinning subpass.

    grid is a uint8 array of 0/1 values. A foreground pixel is marked for
    deletion when all of the following hold on the frozen grid:

    * its 8-neighbour count is in [2, 6],
    * the number of 0->1 transitions around the clockwise neighbour ring
      (p2..p9, cyclic) is exactly 1,
    * the subpass triplet products vanish:
      parity 0: p2*p4*p6 == 0 and p4*p6*p8 == 0
      parity 1: p2*p4*p8 == 0 and p2*p6*p8 == 0
    """
    g = np.pad(grid, 1)
    p2 = g[:-2, 1:-1]
    p3 = g[:-2, 2:]
    p4 = g[1:-1, 2:]
    p5 = g[2:, 2:]
    p6 = g[2:, 1:-1]
    p7 = g[2:, :-2]
    p8 = g[1:-1, :-2]
    p9 = g[:-2, :-2]
    ring = (p2, p3, p4, p5, p6, p7, p8, p9)

    count = np.zeros(grid.shape, dtype=np.int16)
    for p in ring:
        count += p
    trans = np.zeros(grid.shape, dtype=np.int16)
    for i in range(8):
        trans += (ring[i] == 0) & (ring[(i + 1) % 8] == 1)

    if parity == 0:
        c3 = (p2 & p4 & p6) == 0
        c4 = (p4 & p6 & p8) == 0
    else:
        c3 = (p2 & p4 & p8) == 0
        c4 = (p2 & p6 & p8) == 0

    return ((grid == 1) & (count >= 2) & (count <= 6) & (trans == 1)
            & c3 & c4)


def rasterize_tube(height, width, points, radius):
    """Binary mask of all pixels within ``radius`` of the polyline.

    ``points`` is an (n, 2) float array of (x, y) pixel coordinates; a
    single point renders a disk. Pixel centers sit on integer coordinates.
    """
    mask = np.zeros((height, width), dtype=np.uint8)
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) == 0:
        return mask
    r2 = float(radius) * float(radius)
    segs = [(pts[0], pts[0])] if len(pts) == 1 else list(zip(pts[:-1], pts[1:]))
    for a, b in segs:
        x0 = max(0, int(np.floor(min(a[0], b[0]) - radius)))
        x1 = min(width - 1, int(np.ceil(max(a[0], b[0]) + radius)))
        y0 = max(0, int(np.floor(min(a[1], b[1]) - radius)))
        y1 = min(height - 1, int(np.ceil(max(a[1], b[1]) + radius)))
        if x1 < x0 or y1 < y0:
            continue
        xs = np.arange(x0, x1 + 1, dtype=np.float64)
        ys = np.arange(y0, y1 + 1, dtype=np.float64)
        px, py = np.meshgrid(xs, ys)
        dx = b[0] - a[0]
        dy = b[1] - a[1]
        ab2 = dx * dx + dy * dy
        if ab2 == 0.0:
            cx, cy = a[0], a[1]
            d2 = (px - cx) ** 2 + (py - cy) ** 2
        else:
            t = ((px - a[0]) * dx + (py - a[1]) * dy) / ab2
            t = np.clip(t, 0.0, 1.0)
            cx = a[0] + t * dx
            cy = a[1] + t * dy
            d2 = (px - cx) ** 2 + (py - cy) ** 2
        mask[y0:y1 + 1, x0:x1 + 1] |= (d2 <= r2).astype(np.uint8)
    return mask
