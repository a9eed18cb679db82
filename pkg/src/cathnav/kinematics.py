"""Constant-curvature catheter model.

The catheter is a straight shaft that follows the committed vessel
centerline, terminated by a pre-curved distal segment: a circular arc of
fixed bend angle. Rolling the base about the shaft axis rotates the arc
out of the image plane, so the projected lateral tip offset is

    offset = +offset_max * cos(roll)

which is what the imaging pipeline observes as the signed line distance.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import geometry

# points used to sample the distal arc
ARC_SAMPLES = 24


@dataclass(frozen=True)
class CatheterConfig:
    total_length_mm: float = 600.0
    distal_bend_angle_deg: float = 30.0
    distal_segment_mm: float = 15.0
    tube_radius_px: float = 3.0
    px_per_mm: float = 8.6

    def __post_init__(self):
        if min(self.total_length_mm, self.distal_bend_angle_deg,
               self.distal_segment_mm, self.tube_radius_px, self.px_per_mm) <= 0:
            raise ValueError("catheter config values must be positive")
        if self.distal_segment_mm >= self.total_length_mm:
            raise ValueError("distal segment must be shorter than the catheter")

    @property
    def bend_radius_mm(self):
        return self.distal_segment_mm / math.radians(self.distal_bend_angle_deg)

    @property
    def tip_lateral_mm(self):
        """In-plane lateral tip offset of the un-rolled bend."""
        return self.bend_radius_mm * (1.0 - math.cos(math.radians(self.distal_bend_angle_deg)))

    @property
    def tip_along_mm(self):
        """Along-axis extent of the bend (invariant under roll)."""
        return self.bend_radius_mm * math.sin(math.radians(self.distal_bend_angle_deg))

    @property
    def d_max_px(self):
        """Maximum attainable |signed offset| in pixels."""
        return self.tip_lateral_mm * self.px_per_mm


@dataclass(frozen=True)
class TipFrame:
    """Tip endpoint in the canonical shaft frame (mm): x along the shaft
    axis, y in-plane lateral, z out-of-plane."""
    x: float
    y: float
    z: float


def canonical_tip_frame(config):
    """Tip endpoint of the un-rolled bend: z = 0, y = max lateral offset."""
    return TipFrame(x=config.tip_along_mm, y=config.tip_lateral_mm, z=0.0)


def curvature(points):
    """Per-point curvature |g' x g''| / |g'|^3 of an arc-sampled polyline.

    Derivatives use central differences with one-sided ends. Accepts 2D or
    3D points.
    """
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if np.any(seg == 0.0):
        raise ValueError("repeated points make curvature undefined")
    s = np.concatenate([[0.0], np.cumsum(seg)])
    d1 = np.gradient(pts, s, axis=0, edge_order=2)
    d2 = np.gradient(d1, s, axis=0, edge_order=2)
    if pts.shape[1] == 2:
        cross = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    else:
        cross = np.linalg.norm(np.cross(d1, d2), axis=1)
    speed = np.linalg.norm(d1, axis=1)
    return cross / speed**3


def rotated_offset(tip, theta_deg):
    """Unsigned in-plane distance of the rolled tip from the shaft axis."""
    t = math.radians(theta_deg)
    return abs(tip.y * math.cos(t) - tip.z * math.sin(t))


def pitch_from_distance(offset_px, config):
    """Roll angle (0..180 deg) whose in-plane tip offset equals offset_px.

    Values outside [-d_max, d_max] are clamped to the nearest attainable
    offset before inversion.
    """
    d_max = config.d_max_px
    d = min(max(float(offset_px), -d_max), d_max)
    return math.degrees(math.acos(d / d_max))


def actuator_command(theta_pitch_deg, current_roll_deg):
    """Minimal signed roll increment taking the current roll to the target
    pitch; always in (-180, 180]."""
    return geometry.wrap_deg(theta_pitch_deg - current_roll_deg)


def _arc_local_mm(config, s_from_mm, s_to_mm, n=ARC_SAMPLES):
    """Sample the bend arc in its own plane between arc lengths s_from..s_to.

    Returns (n, 2) points (along, lateral) in mm with the convention that
    the arc starts at the origin heading along +x.
    """
    r = config.bend_radius_mm
    a0 = s_from_mm / r
    a1 = s_to_mm / r
    ang = np.linspace(a0, a1, n)
    x = r * np.sin(ang)
    y = r * (1.0 - np.cos(ang))
    pts = np.stack([x, y], axis=1)
    # re-frame so the sampled piece starts at the origin, heading +x
    pts -= pts[0]
    c, s = math.cos(-a0), math.sin(-a0)
    rot = np.array([[c, -s], [s, c]])
    return pts @ rot.T


def body_polyline(config, insertion_mm, roll_deg, route_centerline_px,
                  shaft_spacing_px=4.0):
    """Solve the catheter body for a given insertion depth and base roll.

    The proximal part follows the route centerline; the distal
    ``distal_segment_mm`` is the constant-curvature bend, rolled about the
    local shaft axis. Returns (points_3d_mm, points_2d_px): the 3D polyline
    in a canvas-aligned frame (z out of plane, mm) and its 2D pixel
    projection.
    """
    if insertion_mm < 0:
        raise ValueError("insertion must be non-negative")
    ppm = config.px_per_mm
    route_len_mm = geometry.polyline_length(route_centerline_px) / ppm
    if insertion_mm - config.distal_segment_mm > route_len_mm:
        raise ValueError("insertion exceeds the route length")

    bend_mm = min(insertion_mm, config.distal_segment_mm)
    shaft_mm = insertion_mm - bend_mm
    shaft_end_px = shaft_mm * ppm

    # shaft vertices along the route (piecewise-linear interpolation of the
    # centerline against its arc length)
    route = np.asarray(route_centerline_px, dtype=np.float64)
    cum = geometry.cumulative_arclength(route)
    n_shaft = max(2, int(math.ceil(shaft_end_px / shaft_spacing_px)) + 1)
    ss = np.linspace(0.0, min(shaft_end_px, cum[-1]), n_shaft)
    shaft2d = np.stack([np.interp(ss, cum, route[:, 0]),
                        np.interp(ss, cum, route[:, 1])], axis=1)
    if shaft_mm == 0.0:
        shaft2d = shaft2d[:1]

    tangent = geometry.tangent_at_arclength(route_centerline_px, shaft_end_px)
    normal = geometry.rot90(tangent)

    pts3 = [np.array([p[0] / ppm, p[1] / ppm, 0.0]) for p in shaft2d]
    if bend_mm > 0.0:
        local = _arc_local_mm(config, config.distal_segment_mm - bend_mm,
                              config.distal_segment_mm)
        theta = math.radians(roll_deg)
        base = shaft2d[-1] / ppm
        for along, lat in local[1:]:
            inplane = lat * math.cos(theta)
            outplane = lat * math.sin(theta)
            xy = base + along * tangent + inplane * normal
            pts3.append(np.array([xy[0], xy[1], outplane]))
    pts3 = np.array(pts3, dtype=np.float64)
    pts2_px = pts3[:, :2] * ppm
    return pts3, pts2_px


def tip_direction_2d(config, roll_deg, tangent):
    """Unit 2D direction of the projected tip tangent for a given roll."""
    phi = math.radians(config.distal_bend_angle_deg)
    theta = math.radians(roll_deg)
    along = math.cos(phi)
    lateral = math.sin(phi) * math.cos(theta)
    v = along * np.asarray(tangent, dtype=np.float64) + lateral * geometry.rot90(tangent)
    return geometry.unit(v)


def signed_inplane_offset(config, roll_deg):
    """Signed lateral tip offset (px) of the bend for a given roll."""
    return config.d_max_px * math.cos(math.radians(roll_deg))
