"""Planar geometry helpers shared by the phantom, kinematics and env code.

All polylines are float64 arrays of shape (n, 2) in pixel coordinates,
x = column, y = row.
"""

import numpy as np


def wrap_deg(angle):
    """Wrap an angle in degrees into (-180, 180]."""
    a = float(angle) % 360.0
    if a > 180.0:
        a -= 360.0
    return a


def unit(v):
    """Normalize a 2-vector; raises on a zero vector."""
    v = np.asarray(v, dtype=np.float64)
    n = float(np.hypot(v[0], v[1]))
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def cross2(a, b):
    """Scalar 2D cross product a_x*b_y - a_y*b_x."""
    return float(a[0]) * float(b[1]) - float(a[1]) * float(b[0])


def rot90(v):
    """Rotate a 2-vector by +90 degrees (x, y) -> (-y, x)."""
    return np.array([-v[1], v[0]], dtype=np.float64)


def cumulative_arclength(points):
    """Cumulative arc length per vertex, starting at 0."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 2:
        return np.zeros(len(pts))
    seg = np.hypot(*(pts[1:] - pts[:-1]).T)
    return np.concatenate([[0.0], np.cumsum(seg)])


def polyline_length(points):
    s = cumulative_arclength(points)
    return float(s[-1]) if len(s) else 0.0


def point_at_arclength(points, s):
    """Point on the polyline at arc position s (clamped to [0, length])."""
    pts = np.asarray(points, dtype=np.float64)
    cum = cumulative_arclength(pts)
    s = min(max(float(s), 0.0), float(cum[-1]))
    i = int(np.searchsorted(cum, s, side="right")) - 1
    i = min(max(i, 0), len(pts) - 2)
    seg = cum[i + 1] - cum[i]
    t = 0.0 if seg == 0.0 else (s - cum[i]) / seg
    return pts[i] + t * (pts[i + 1] - pts[i])


def tangent_at_arclength(points, s):
    """Unit tangent of the segment containing arc position s."""
    pts = np.asarray(points, dtype=np.float64)
    cum = cumulative_arclength(pts)
    s = min(max(float(s), 0.0), float(cum[-1]))
    i = int(np.searchsorted(cum, s, side="right")) - 1
    i = min(max(i, 0), len(pts) - 2)
    d = pts[i + 1] - pts[i]
    # skip degenerate segments
    while np.hypot(d[0], d[1]) == 0.0 and i > 0:
        i -= 1
        d = pts[i + 1] - pts[i]
    return unit(d)


def project_to_polyline(points, p):
    """Closest point on the polyline to p.

    Returns (distance, arc_position, closest_point).
    """
    pts = np.asarray(points, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if len(pts) == 1:
        d = float(np.hypot(*(p - pts[0])))
        return d, 0.0, pts[0].copy()
    a = pts[:-1]
    b = pts[1:]
    ab = b - a
    ab2 = np.einsum("ij,ij->i", ab, ab)
    ab2_safe = np.where(ab2 == 0.0, 1.0, ab2)
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / ab2_safe, 0.0, 1.0)
    t = np.where(ab2 == 0.0, 0.0, t)
    proj = a + t[:, None] * ab
    d2 = np.einsum("ij,ij->i", proj - p, proj - p)
    i = int(np.argmin(d2))
    cum = cumulative_arclength(pts)
    s = float(cum[i] + t[i] * np.sqrt(ab2[i]))
    return float(np.sqrt(d2[i])), s, proj[i]


def resample_polyline(points, spacing):
    """Resample to roughly uniform vertex spacing, keeping both endpoints."""
    pts = np.asarray(points, dtype=np.float64)
    total = polyline_length(pts)
    if total == 0.0 or len(pts) < 2:
        return pts.copy()
    n = max(2, int(np.ceil(total / spacing)) + 1)
    ss = np.linspace(0.0, total, n)
    return np.array([point_at_arclength(pts, s) for s in ss])
