# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot pixel kernels (thinning subpass, tube
rasterization). Must stay bit-identical to ``_kernels_np``."""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, floor

cnp.import_array()


def thin_subpass_mask(cnp.uint8_t[:, ::1] grid, int parity):
    cdef Py_ssize_t h = grid.shape[0]
    cdef Py_ssize_t w = grid.shape[1]
    out_arr = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] out = out_arr
    cdef Py_ssize_t r, c, i
    cdef int count, trans
    cdef int ring[8]

    for r in range(h):
        for c in range(w):
            if grid[r, c] != 1:
                continue
            ring[0] = grid[r - 1, c] if r > 0 else 0            # p2 N
            ring[1] = grid[r - 1, c + 1] if r > 0 and c + 1 < w else 0    # p3 NE
            ring[2] = grid[r, c + 1] if c + 1 < w else 0        # p4 E
            ring[3] = grid[r + 1, c + 1] if r + 1 < h and c + 1 < w else 0  # p5 SE
            ring[4] = grid[r + 1, c] if r + 1 < h else 0        # p6 S
            ring[5] = grid[r + 1, c - 1] if r + 1 < h and c > 0 else 0     # p7 SW
            ring[6] = grid[r, c - 1] if c > 0 else 0            # p8 W
            ring[7] = grid[r - 1, c - 1] if r > 0 and c > 0 else 0         # p9 NW

            count = 0
            trans = 0
            for i in range(8):
                count += ring[i]
                if ring[i] == 0 and ring[(i + 1) % 8] == 1:
                    trans += 1
            if count < 2 or count > 6 or trans != 1:
                continue
            if parity == 0:
                if ring[0] and ring[2] and ring[4]:
                    continue
                if ring[2] and ring[4] and ring[6]:
                    continue
            else:
                if ring[0] and ring[2] and ring[6]:
                    continue
                if ring[0] and ring[4] and ring[6]:
                    continue
            out[r, c] = 1
    return out_arr.view(bool)


def rasterize_tube(Py_ssize_t height, Py_ssize_t width, double[:, ::1] points,
                   double radius):
    mask_arr = np.zeros((height, width), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] mask = mask_arr
    cdef Py_ssize_t n = points.shape[0]
    if n == 0:
        return mask_arr
    cdef double r2 = radius * radius
    cdef Py_ssize_t i, x, y, x0, x1, y0, y1
    cdef Py_ssize_t nseg = n - 1 if n > 1 else 1
    cdef double ax, ay, bx, by, dx, dy, ab2, t, cx, cy, px, py, d2

    for i in range(nseg):
        ax = points[i, 0]
        ay = points[i, 1]
        if n > 1:
            bx = points[i + 1, 0]
            by = points[i + 1, 1]
        else:
            bx = ax
            by = ay
        x0 = <Py_ssize_t>floor(min(ax, bx) - radius)
        x1 = <Py_ssize_t>ceil(max(ax, bx) + radius)
        y0 = <Py_ssize_t>floor(min(ay, by) - radius)
        y1 = <Py_ssize_t>ceil(max(ay, by) + radius)
        if x0 < 0:
            x0 = 0
        if y0 < 0:
            y0 = 0
        if x1 > width - 1:
            x1 = width - 1
        if y1 > height - 1:
            y1 = height - 1
        dx = bx - ax
        dy = by - ay
        ab2 = dx * dx + dy * dy
        for y in range(y0, y1 + 1):
            py = <double>y
            for x in range(x0, x1 + 1):
                px = <double>x
                if ab2 == 0.0:
                    cx = ax
                    cy = ay
                else:
                    t = ((px - ax) * dx + (py - ay) * dy) / ab2
                    if t < 0.0:
                        t = 0.0
                    elif t > 1.0:
                        t = 1.0
                    cx = ax + t * dx
                    cy = ay + t * dy
                d2 = (px - cx) * (px - cx) + (py - cy) * (py - cy)
                if d2 <= r2:
                    mask[y, x] = 1
    return mask_arr
