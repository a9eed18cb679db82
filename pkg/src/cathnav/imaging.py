"""Binary-mask imaging pipeline: thinning, centerline extraction,
smoothing, proximal-line fitting and signed tip-offset estimation.

Masks are 2D bool/uint8 arrays indexed ``mask[y, x]`` (row = y). Pixel
calibration follows the bench camera: 215 px = 2.5 cm of translation and
1.125 degrees of rotation per pixel of lateral offset.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.signal import savgol_filter

from . import kernels

CM_PER_PX = 2.5 / 215.0
DEG_PER_PX = 1.125
ROT_OFFSET_SPAN_PX = 80.0
TRANS_SPAN_PX = 215.0
SLOPE_CAP = 1e6


class ImagingError(Exception):
    """Raised when the pipeline cannot recover a pose from a mask."""


@dataclass
class SkeletonPath:
    """Ordered centerline points (x, y) between the two skeleton endpoints."""
    points: np.ndarray
    q1: tuple
    q2: tuple
    disconnected: bool = False
    smoothed: bool = False


@dataclass(frozen=True)
class LineFit:
    k: float
    b: float
    vertical: bool = False


@dataclass(frozen=True)
class TipPose:
    tip_px: np.ndarray       # distal endpoint (x, y)
    offset_px: float         # signed distance of the tip from the shaft line
    line: LineFit
    tip_tangent: np.ndarray  # unit direction of travel at the tip


# ---------------------------------------------------------------------------
# Thinning
# ---------------------------------------------------------------------------

def connectivity_number(neighborhood):
    """Number of 0->1 transitions in the cyclic ring p2..p9."""
    ring = [1 if v else 0 for v in neighborhood]
    if len(ring) != 8:
        raise ValueError("neighborhood must have exactly 8 values")
    return sum(ring[i] == 0 and ring[(i + 1) % 8] == 1 for i in range(8))


def _label8(grid):
    labels, count = ndimage.label(grid, structure=np.ones((3, 3), dtype=int))
    return labels, count


def thin(img):
    """Two-subpass iterative thinning to a 1-px-wide skeleton.

    Runs both subpasses until a fixed point. A deletion that would wipe out
    a whole connected component is rolled back to the component's
    lexicographically-first pixel, so component counts survive degenerate
    blobs (an isolated 2x2 square is otherwise erased entirely).
    """
    grid = np.ascontiguousarray(np.asarray(img) != 0).astype(np.uint8)
    if grid.ndim != 2:
        raise ValueError("expected a 2D binary image")
    struct = np.ones((3, 3), dtype=bool)
    changed = True
    while changed:
        changed = False
        for parity in (0, 1):
            mask = kernels.thin_subpass_mask(grid, parity)
            if not mask.any():
                continue
            survivors = grid.astype(bool) & ~mask
            # a deleted pixel with no surviving 8-neighbour flags a possible
            # component wipe-out; only then pay for full labelling
            if (not survivors.any()
                    or np.any(mask & ~ndimage.binary_dilation(survivors, struct))):
                mask = _spare_component_seeds(grid, mask)
                if not mask.any():
                    continue
            grid[mask] = 0
            changed = True
    return grid.astype(bool)


def _spare_component_seeds(grid, deletions):
    """Unmark the first pixel of any component the mask would delete whole."""
    labels, count = _label8(grid)
    out = deletions.copy()
    for lab in range(1, count + 1):
        comp = labels == lab
        if not np.any(comp & ~out):
            ys, xs = np.nonzero(comp)
            out[ys[0], xs[0]] = False
    return out


# ---------------------------------------------------------------------------
# Centerline extraction
# ---------------------------------------------------------------------------

_NEIGHBOR_STEPS = [(-1, -1), (-1, 0), (-1, 1), (0, -1),
                   (0, 1), (1, -1), (1, 0), (1, 1)]


def _bfs_distances(skel_set, start):
    dist = {start: 0}
    queue = [start]
    head = 0
    while head < len(queue):
        cur = queue[head]
        head += 1
        for dr, dc in _NEIGHBOR_STEPS:
            nxt = (cur[0] + dr, cur[1] + dc)
            if nxt in skel_set and nxt not in dist:
                dist[nxt] = dist[cur] + 1
                queue.append(nxt)
    return dist


def extract_centerline(skel, original):
    """Endpoint discovery and path extraction on a thinned image.

    A seed pixel is taken at the largest Euclidean-distance-transform value
    of the original mask; the two endpoints are found by the double
    breadth-first sweep (farthest from the seed, then farthest from that),
    giving the longest path of the skeleton component. The endpoint with
    the deeper transform value is labeled q1. Ties resolve to the lowest
    (row, col). EDT values are compared in half-pixel buckets: sub-pixel
    depth differences are lattice noise, not meaningful maxima.
    """
    skel = np.asarray(skel, dtype=bool)
    pixels = np.argwhere(skel)
    if len(pixels) == 0:
        raise ImagingError("empty skeleton")
    edt = ndimage.distance_transform_edt(np.asarray(original, dtype=bool))
    quantized = np.round(edt * 2.0) / 2.0
    values = quantized[skel]
    best = values.max()
    candidates = pixels[values == best]
    seed = tuple(candidates[np.lexsort((candidates[:, 1], candidates[:, 0]))[0]])

    skel_set = set(map(tuple, pixels))
    dist_seed = _bfs_distances(skel_set, seed)
    disconnected = len(dist_seed) < len(skel_set)

    def farthest(dist):
        far = max(dist.values())
        return sorted(p for p, d in dist.items() if d == far)[0]

    end_a = farthest(dist_seed)
    dist_a = _bfs_distances(skel_set, end_a)
    end_b = farthest(dist_a)

    # walk end_b -> end_a by strictly decreasing BFS distance
    path = [end_b]
    cur = end_b
    while dist_a[cur] > 0:
        nxt = min((cur[0] + dr, cur[1] + dc) for dr, dc in _NEIGHBOR_STEPS
                  if dist_a.get((cur[0] + dr, cur[1] + dc), -1) == dist_a[cur] - 1)
        path.append(nxt)
        cur = nxt
    path.reverse()  # now end_a -> end_b

    # deeper end is q1; equal depths fall back to the lowest (row, col)
    qa, qb = quantized[end_a], quantized[end_b]
    if qa > qb or (qa == qb and end_a <= end_b):
        q1, q2 = end_a, end_b
    else:
        q1, q2 = end_b, end_a
        path.reverse()

    points = np.array([(c, r) for r, c in path], dtype=np.float64)
    return SkeletonPath(points=points, q1=(q1[1], q1[0]), q2=(q2[1], q2[0]),
                        disconnected=disconnected)


def smooth_path(path, window=9, order=3):
    """Per-coordinate Savitzky-Golay smoothing of the centerline.

    Endpoints use the fitted boundary polynomial. Paths shorter than the
    window are returned unchanged with ``smoothed`` left False.
    """
    if window % 2 != 1:
        raise ValueError("window must be odd")
    if order >= window:
        raise ValueError("order must be less than window")
    pts = path.points
    if len(pts) < window:
        return SkeletonPath(pts.copy(), path.q1, path.q2, path.disconnected,
                            smoothed=False)
    sm = np.stack([savgol_filter(pts[:, 0], window, order, mode="interp"),
                   savgol_filter(pts[:, 1], window, order, mode="interp")],
                  axis=1)
    return SkeletonPath(sm, path.q1, path.q2, path.disconnected, smoothed=True)


# ---------------------------------------------------------------------------
# Line fit and signed distance
# ---------------------------------------------------------------------------

def proximal_end_index(path, entry_side="left"):
    """Index (0 or -1) of the path endpoint nearer the image entry edge."""
    first, last = path.points[0], path.points[-1]
    keys = {
        "left": (first[0], last[0]),
        "right": (-first[0], -last[0]),
        "top": (first[1], last[1]),
        "bottom": (-first[1], -last[1]),
    }
    if entry_side not in keys:
        raise ValueError(f"unknown entry side {entry_side!r}")
    a, b = keys[entry_side]
    return 0 if a <= b else -1


def fit_proximal_line(path, entry_side="left", fraction=0.3):
    """Least-squares line k*x - y + b = 0 over the proximal 30% of points."""
    pts = path.points
    if len(pts) < 4:
        raise ImagingError("path too short for a line fit")
    count = max(2, int(math.ceil(fraction * len(pts))))
    if proximal_end_index(path, entry_side) == 0:
        seg = pts[:count]
    else:
        seg = pts[-count:]
    x, y = seg[:, 0], seg[:, 1]
    xc = x - x.mean()
    denom = float(np.dot(xc, xc))
    if denom < 1e-12 * max(1.0, float(np.dot(y - y.mean(), y - y.mean()))):
        # vertical proximal segment: capped-slope fallback
        k = SLOPE_CAP if (y[-1] - y[0]) >= 0 else -SLOPE_CAP
        b = float(y.mean() - k * x.mean())
        return LineFit(k=k, b=b, vertical=True)
    k = float(np.dot(xc, y - y.mean()) / denom)
    b = float(y.mean() - k * x.mean())
    return LineFit(k=k, b=b)


def signed_distance(point, k, b):
    """Signed distance of a point from k*x - y + b = 0.

    Unsigned value |k*x - y + b| / sqrt(k^2 + 1); the sign is the 2D cross
    product of the line direction (1, k) with the vector from (0, b) to the
    point: positive above the line, negative below.
    """
    x, y = float(point[0]), float(point[1])
    d = abs(k * x - y + b) / math.sqrt(k * k + 1.0)
    cross = 1.0 * (y - b) - k * x
    if cross > 0:
        return d
    if cross < 0:
        return -d
    return 0.0


@dataclass(frozen=True)
class Calibrated:
    d_cm: float
    e_deg: float
    clamped: bool = False


def pixels_to_physical(trans_px, rot_px):
    """Pixel-space pose errors to physical units.

    Translation: 215 px -> 2.5 cm, sign preserved. Rotation: offset pixels
    in [0, 80] -> degrees via e = (80 - E) * 1.125. Inputs outside the
    calibrated spans are clamped and flagged.
    """
    t = float(trans_px)
    r = float(rot_px)
    clamped = False
    if abs(t) > TRANS_SPAN_PX:
        t = math.copysign(TRANS_SPAN_PX, t)
        clamped = True
    if r < 0.0 or r > ROT_OFFSET_SPAN_PX:
        r = min(max(r, 0.0), ROT_OFFSET_SPAN_PX)
        clamped = True
    return Calibrated(d_cm=t * 2.5 / 215.0,
                      e_deg=(ROT_OFFSET_SPAN_PX - r) * DEG_PER_PX,
                      clamped=clamped)


def rotation_error_deg(offset_delta_px):
    """Signed pixel offset difference to degrees (1.125 deg per pixel)."""
    return float(offset_delta_px) * DEG_PER_PX


# ---------------------------------------------------------------------------
# Full chain
# ---------------------------------------------------------------------------

def estimate_tip_pose(mask, entry_side="left", window=9, order=3):
    """Recover the tip pose from a binary catheter mask.

    Chain: thin -> extract_centerline -> smooth_path -> fit_proximal_line
    -> signed_distance at the distal endpoint. Work happens on the
    foreground bounding box; coordinates are mapped back to the full frame.
    """
    mask = np.asarray(mask, dtype=bool)
    ys, xs = np.nonzero(mask)
    if len(ys) == 0:
        raise ImagingError("empty skeleton")
    y0 = max(0, ys.min() - 1)
    y1 = min(mask.shape[0], ys.max() + 2)
    x0 = max(0, xs.min() - 1)
    x1 = min(mask.shape[1], xs.max() + 2)
    crop = mask[y0:y1, x0:x1]

    skel = thin(crop)
    path = extract_centerline(skel, crop)
    path.points += np.array([x0, y0], dtype=np.float64)
    path = SkeletonPath(path.points,
                        (path.q1[0] + x0, path.q1[1] + y0),
                        (path.q2[0] + x0, path.q2[1] + y0),
                        path.disconnected)
    path = smooth_path(path, window=window, order=order)
    line = fit_proximal_line(path, entry_side=entry_side)
    pts = path.points
    if proximal_end_index(path, entry_side) == 0:
        tip = pts[-1]
        prev = pts[max(0, len(pts) - 4)]
    else:
        tip = pts[0]
        prev = pts[min(len(pts) - 1, 3)]
    direction = tip - prev
    norm = float(np.hypot(direction[0], direction[1]))
    tangent = direction / norm if norm > 0 else np.array([1.0, 0.0])
    return TipPose(tip_px=tip.copy(),
                   offset_px=signed_distance(tip, line.k, line.b),
                   line=line,
                   tip_tangent=tangent)


def entry_side_from_tangent(tangent):
    """Entry side of a window for a vessel flowing along ``tangent``."""
    tx, ty = float(tangent[0]), float(tangent[1])
    if abs(tx) >= abs(ty):
        return "left" if tx >= 0 else "right"
    return "top" if ty >= 0 else "bottom"


def estimate_tip_pose_roi(mask, center_xy, half_px, entry_side,
                          window=9, order=3):
    """Tip pose from a square region of interest around ``center_xy``.

    Deeper junctions need the shaft line fitted to the local parent run,
    not the whole catheter; cropping to the junction window achieves that
    with the unchanged pipeline. Coordinates come back in full-frame pixels.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    cx, cy = float(center_xy[0]), float(center_xy[1])
    x0 = max(0, int(math.floor(cx - half_px)))
    x1 = min(w, int(math.ceil(cx + half_px)) + 1)
    y0 = max(0, int(math.floor(cy - half_px)))
    y1 = min(h, int(math.ceil(cy + half_px)) + 1)
    pose = estimate_tip_pose(mask[y0:y1, x0:x1], entry_side=entry_side,
                             window=window, order=order)
    shift = np.array([x0, y0], dtype=np.float64)
    line = LineFit(k=pose.line.k, b=pose.line.b + y0 - pose.line.k * x0,
                   vertical=pose.line.vertical)
    return TipPose(tip_px=pose.tip_px + shift, offset_px=pose.offset_px,
                   line=line, tip_tangent=pose.tip_tangent)


# ---------------------------------------------------------------------------
# PGM fixtures
# ---------------------------------------------------------------------------

def write_pgm(mask, path):
    """Write a mask as binary PGM (P5, 0/255)."""
    arr = (np.asarray(mask, dtype=bool) * np.uint8(255))
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def read_pgm(path):
    """Read a P5 PGM into a bool mask (any nonzero is foreground)."""
    with open(path, "rb") as fh:
        data = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P5":
        raise ImagingError(f"{path}: not a P5 PGM")
    w, h = int(fields[1]), int(fields[2])
    pos += 1  # single whitespace after maxval
    arr = np.frombuffer(data[pos:pos + w * h], dtype=np.uint8).reshape(h, w)
    return arr > 0
