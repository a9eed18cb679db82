"""Deterministic 2D vessel-phantom environment.

State transitions, shaped rewards, termination rules, bifurcation
detection and binary-mask rendering. Geometry is in pixels on the phantom
canvas; insertion depths are in millimetres.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry, kernels, kinematics, phantom
from .imaging import DEG_PER_PX, entry_side_from_tangent

TERMINATION_CAUSES = ("none", "success", "push_limit", "step_limit", "out_of_bounds")


@dataclass(frozen=True)
class EnvConfig:
    push_scale_mm: float = 10.0
    roll_scale_deg: float = 30.0
    initial_insertion_mm: float = 10.0
    max_steps: int = 20
    push_limit_mm: float = 500.0
    bounds_x_px: tuple = (10.0, 900.0)
    trigger_radius_px: float = 80.0
    success_reward: float = 100.0
    failure_reward: float = -150.0
    distance_weight: float = 1.0
    rotation_weight: float = 0.5
    step_cost: float = 0.1


@dataclass(frozen=True)
class Action:
    push: float
    roll: float

    def clamped(self):
        return Action(push=min(max(float(self.push), -1.0), 1.0),
                      roll=min(max(float(self.roll), -1.0), 1.0))


@dataclass(frozen=True)
class Crossing:
    """Snapshot taken when the catheter commits through a route bifurcation."""
    node: int
    tip_px: np.ndarray
    body_px: np.ndarray
    geometric_offset_px: float
    insertion_mm: float
    roll_deg: float
    step_count: int


@dataclass
class CatheterState:
    insertion_mm: float
    roll_deg: float
    body_px: np.ndarray
    step_count: int
    push_total_mm: float
    committed: tuple            # edge ids, a root path through the graph
    fired: frozenset            # bifurcation nodes already announced
    crossings: tuple            # Crossing records, in order
    done: bool
    cause: str
    dist_at_reset_px: float
    seed: int

    @property
    def tip_px(self):
        return self.body_px[-1]


@dataclass(frozen=True)
class StepOutcome:
    observation: np.ndarray
    reward: float
    done: bool
    cause: str


@dataclass(frozen=True)
class BifurcationEvent:
    node: int
    distance_px: float
    daughters: tuple
    bifurcation: phantom.Bifurcation


class CatheterEnv:
    """Single-threaded deterministic environment over one vessel map."""

    OBSERVATION_DIM = 8

    def __init__(self, vmap, env_config=None, catheter_config=None):
        self.vmap = vmap
        self.config = env_config or EnvConfig()
        self.catheter = catheter_config or kinematics.CatheterConfig()
        self.route = phantom.plan_route(vmap)
        self._diag = math.hypot(vmap.canvas_px[0], vmap.canvas_px[1])
        # alignment offsets the route expects at each of its bifurcations
        self._route_alignment = {
            rb.bifurcation.node: branch_alignment_offset(
                vmap, self.route, rb, self.catheter)
            for rb in self.route.bifurcations
        }

    # -- construction helpers ------------------------------------------------

    def _committed_centerline(self, committed):
        pts = []
        node = self.vmap.entry
        for eid in committed:
            e = self.vmap.edges[eid]
            poly = e.polyline if e.src == node else e.polyline[::-1]
            pts.append(poly if not pts else poly[1:])
            node = e.dst if e.src == node else e.src
        return np.vstack(pts), node

    def _daughter_tangent(self, eid, node):
        e = self.vmap.edges[eid]
        poly = e.polyline if e.src == node else e.polyline[::-1]
        return geometry.unit(poly[1] - poly[0])

    def _tip_along_px(self, insertion_mm):
        cfg = self.catheter
        bend_mm = min(insertion_mm, cfg.distal_segment_mm)
        shaft_px = (insertion_mm - bend_mm) * cfg.px_per_mm
        if bend_mm >= cfg.distal_segment_mm:
            along_mm = cfg.tip_along_mm
        else:
            r = cfg.bend_radius_mm
            along_mm = r * math.sin(bend_mm / r)
        return shaft_px + along_mm * cfg.px_per_mm

    def _project_into_lumen(self, body):
        """Clamp every body vertex into the nearest vessel tube (the edge
        with the smallest distance-minus-radius margin wins). Vectorized
        over vertices and edge segments."""
        pts = np.asarray(body, dtype=np.float64)
        best_margin = np.full(len(pts), np.inf)
        best_dist = np.zeros(len(pts))
        best_closest = np.zeros_like(pts)
        best_radius = np.zeros(len(pts))
        for e in self.vmap.edges.values():
            poly = e.polyline
            a = poly[:-1]
            d = poly[1:] - a
            d2 = np.einsum("ij,ij->i", d, d)
            d2 = np.where(d2 == 0.0, 1.0, d2)
            # (n_pts, n_segs) projection parameters
            t = np.clip(((pts[:, None, :] - a[None, :, :]) * d[None, :, :])
                        .sum(-1) / d2[None, :], 0.0, 1.0)
            closest = a[None, :, :] + t[:, :, None] * d[None, :, :]
            dist = np.sqrt(((pts[:, None, :] - closest) ** 2).sum(-1))
            seg = np.argmin(dist, axis=1)
            rows = np.arange(len(pts))
            dist_e = dist[rows, seg]
            margin = dist_e - e.radius_px
            take = margin < best_margin
            best_margin[take] = margin[take]
            best_dist[take] = dist_e[take]
            best_closest[take] = closest[rows, seg][take]
            best_radius[take] = e.radius_px
        out = pts.copy()
        outside = best_margin > 0.0
        if np.any(outside):
            safe = np.where(best_dist[outside] == 0.0, 1.0, best_dist[outside])
            scale = (best_radius[outside] / safe)[:, None]
            out[outside] = (best_closest[outside]
                            + (pts[outside] - best_closest[outside]) * scale)
        return out

    # -- public API ----------------------------------------------------------

    def reset(self, seed=0):
        """Fresh episode: fixed insertion, zero roll, step count zero."""
        state = CatheterState(
            insertion_mm=self.config.initial_insertion_mm,
            roll_deg=0.0,
            body_px=np.zeros((1, 2)),
            step_count=0,
            push_total_mm=0.0,
            committed=(self.route.edge_ids[0],),
            fired=frozenset(),
            crossings=(),
            done=False,
            cause="none",
            dist_at_reset_px=1.0,
            seed=int(seed),
        )
        state = self._advance(state, 0.0, 0.0, count_step=False)
        state.step_count = 0
        state.push_total_mm = 0.0
        state.dist_at_reset_px = max(
            1e-9, float(np.hypot(*(self.vmap.target.center - state.tip_px))))
        return state, self.observe(state)

    def step(self, state, action):
        """One control step: scaled push/roll, kinematics re-solve, reward
        and termination. Stepping a terminal state is a contract violation."""
        if state.done:
            raise RuntimeError("step() called on a terminal state")
        act = action.clamped()
        new = self._advance(state,
                            act.push * self.config.push_scale_mm,
                            act.roll * self.config.roll_scale_deg,
                            count_step=True)
        new.done, new.cause = self._termination(new, prev_tip=state.tip_px)
        reward = self.compute_reward(new, state)
        return new, StepOutcome(self.observe(new), reward, new.done, new.cause)

    def apply_correction(self, state, action):
        """Kinematics-only update used by the pose-correction loop: no step
        counting, no reward, no termination."""
        act = action.clamped()
        return self._advance(state,
                             act.push * self.config.push_scale_mm,
                             act.roll * self.config.roll_scale_deg,
                             count_step=False)

    def _advance(self, state, push_mm, roll_delta_deg, count_step):
        """Update insertion/roll, re-resolve the committed branch path and
        the body polyline.

        The branch choice at a junction stays provisional while the distal
        bend straddles it (the floppy tip can still flip sides); it locks
        once the stiff shaft passes the node, which is also when the
        crossing snapshot is taken.
        """
        cfg = self.catheter
        insertion = max(0.0, state.insertion_mm + push_mm)
        roll = geometry.wrap_deg(state.roll_deg + roll_delta_deg)
        push_total = state.push_total_mm + max(push_mm, 0.0)
        committed = list(state.committed)
        crossings = list(state.crossings)
        crossed_nodes = {c.node for c in crossings}
        shaft_px = max(0.0, (insertion - cfg.distal_segment_mm) * cfg.px_per_mm)

        # unlock: drop committed branches whose junction the shaft has not
        # passed (covers both retraction and provisional tip choices)
        centerline, end_node = self._committed_centerline(committed)
        while len(committed) > 1:
            last = self.vmap.edges[committed[-1]]
            prefix_len = geometry.polyline_length(centerline) - \
                geometry.polyline_length(last.polyline)
            if shaft_px >= prefix_len:
                break
            committed.pop()
            centerline, end_node = self._committed_centerline(committed)

        # advance: extend through junctions as the tip reaches them
        while True:
            length = geometry.polyline_length(centerline)
            tip_along = self._tip_along_px(insertion)
            if tip_along <= length + 1e-9:
                break
            bif = self.vmap.bifurcation_at(end_node)
            if bif is not None and bif.parent == committed[-1]:
                tangent = geometry.tangent_at_arclength(centerline,
                                                        min(shaft_px, length))
                tip_dir = kinematics.tip_direction_2d(cfg, roll, tangent)
                chosen = max(bif.daughters,
                             key=lambda d: float(np.dot(
                                 tip_dir, self._daughter_tangent(d, end_node))))
                committed.append(chosen)
                centerline, end_node = self._committed_centerline(committed)
                continue
            # plain continuation through a degree-2 node
            cont = [e.eid for e in self.vmap.edges_at(end_node)
                    if e.eid != committed[-1]]
            if bif is None and len(cont) == 1:
                committed.append(cont[0])
                centerline, end_node = self._committed_centerline(committed)
                continue
            # leaf (or un-modelled junction): dock against the vessel end
            over_px = tip_along - length
            insertion -= over_px / cfg.px_per_mm
            break

        _, body2d = kinematics.body_polyline(cfg, insertion, roll, centerline)
        body2d = self._project_into_lumen(body2d)

        new = replace(
            state,
            insertion_mm=insertion,
            roll_deg=roll,
            body_px=body2d,
            step_count=state.step_count + (1 if count_step else 0),
            push_total_mm=push_total,
            committed=tuple(committed),
            crossings=tuple(crossings),
        )

        # record locked crossings of on-route bifurcations
        route_nodes = {rb.bifurcation.node: rb for rb in self.route.bifurcations}
        arc = 0.0
        node = self.vmap.entry
        for eid in committed:
            if node in route_nodes and node not in crossed_nodes and shaft_px >= arc:
                new.crossings = new.crossings + (Crossing(
                    node=node,
                    tip_px=new.tip_px.copy(),
                    body_px=new.body_px.copy(),
                    geometric_offset_px=self.geometric_offset(new),
                    insertion_mm=insertion,
                    roll_deg=roll,
                    step_count=new.step_count,
                ),)
                crossed_nodes.add(node)
            e = self.vmap.edges[eid]
            poly = e.polyline if e.src == node else e.polyline[::-1]
            arc += geometry.polyline_length(poly)
            node = e.dst if e.src == node else e.src
        return new

    # -- derived quantities ---------------------------------------------------

    def geometric_offset(self, state):
        """Signed lateral offset (px) of the tip from the local shaft line."""
        cfg = self.catheter
        centerline, _ = self._committed_centerline(state.committed)
        shaft_px = max(0.0, (state.insertion_mm - cfg.distal_segment_mm) * cfg.px_per_mm)
        shaft_px = min(shaft_px, geometry.polyline_length(centerline))
        anchor = geometry.point_at_arclength(centerline, shaft_px)
        tangent = geometry.tangent_at_arclength(centerline, shaft_px)
        return geometry.cross2(tangent, state.tip_px - anchor)

    def upcoming_route_bifurcation(self, state):
        crossed = {c.node for c in state.crossings}
        for rb in self.route.bifurcations:
            if rb.bifurcation.node not in crossed:
                return rb
        return None

    def alignment_error_deg(self, state):
        """Rotation penalty term: how far the tip offset is from the value
        that lines up with the next on-route daughter (0 when past all
        bifurcations)."""
        rb = self.upcoming_route_bifurcation(state)
        if rb is None:
            return 0.0
        want = self._route_alignment[rb.bifurcation.node]
        return (want - self.geometric_offset(state)) * DEG_PER_PX

    def observe(self, state):
        """8-entry observation vector, all values finite and normalized."""
        w, h = self.vmap.canvas_px
        tip = state.tip_px
        to_target = self.vmap.target.center - tip
        dist = float(np.hypot(*to_target))
        direction = to_target / dist if dist > 0 else np.zeros(2)
        rb = self.upcoming_route_bifurcation(state)
        if rb is None:
            bif_dist = 1.0
        else:
            node_xy = self.vmap.nodes[rb.bifurcation.node]
            bif_dist = min(1.0, float(np.hypot(*(node_xy - tip))) / self._diag)
        d_norm = min(1.0, max(-1.0, self.geometric_offset(state) / self.catheter.d_max_px))
        route_mm = self.route.length_px / self.catheter.px_per_mm
        obs = np.array([
            min(1.0, max(0.0, tip[0] / w)),
            min(1.0, max(0.0, tip[1] / h)),
            d_norm,
            direction[0],
            direction[1],
            min(1.0, dist / self._diag),
            bif_dist,
            min(1.0, state.insertion_mm / route_mm),
        ], dtype=np.float64)
        return obs

    def _termination(self, state, prev_tip=None):
        lo, hi = self.config.bounds_x_px
        tip = state.tip_px
        # success when the tip's motion during the step swept the target disk
        path = np.array([tip, tip]) if prev_tip is None else np.array([prev_tip, tip])
        swept, _, _ = geometry.project_to_polyline(path, self.vmap.target.center)
        if swept <= self.vmap.target.radius_px:
            return True, "success"
        if tip[0] < lo or tip[0] > hi:
            return True, "out_of_bounds"
        if state.push_total_mm > self.config.push_limit_mm:
            return True, "push_limit"
        if state.step_count >= self.config.max_steps:
            return True, "step_limit"
        return False, "none"

    def compute_reward(self, state, prev_state):
        """Terminal bonuses/penalties plus dense distance/alignment shaping."""
        c = self.config
        if state.done and state.cause == "success":
            return c.success_reward
        if state.done and state.cause in ("push_limit", "step_limit", "out_of_bounds"):
            return c.failure_reward
        dist = float(np.hypot(*(self.vmap.target.center - state.tip_px)))
        shaped = -(c.distance_weight * dist / state.dist_at_reset_px)
        shaped -= c.rotation_weight * abs(self.alignment_error_deg(state)) / 90.0
        shaped -= c.step_cost
        return shaped

    def render_mask(self, state, width=None, height=None):
        """Binary image of the catheter tube; deterministic in the state."""
        w = int(width or self.vmap.canvas_px[0])
        h = int(height or self.vmap.canvas_px[1])
        return kernels.rasterize_tube(h, w, state.body_px, self.catheter.tube_radius_px)

    def correction_view(self, node):
        """Pose-estimation window for a junction: (center_px, entry_side)."""
        rb = next(rb for rb in self.route.bifurcations
                  if rb.bifurcation.node == node)
        tangent = geometry.tangent_at_arclength(
            self.route.centerline, max(0.0, rb.node_arc_px - 1e-6))
        return self.vmap.nodes[node].copy(), entry_side_from_tangent(tangent)

    def detect_bifurcation(self, state):
        """Event when the tip is within the trigger radius of an unvisited
        on-route bifurcation; each node fires at most once per episode."""
        crossed = {c.node for c in state.crossings}
        for rb in self.route.bifurcations:
            node = rb.bifurcation.node
            if node in state.fired or node in crossed:
                continue
            d = float(np.hypot(*(self.vmap.nodes[node] - state.tip_px)))
            if d <= self.config.trigger_radius_px:
                state.fired = state.fired | {node}
                return BifurcationEvent(node=node, distance_px=d,
                                        daughters=rb.bifurcation.daughters,
                                        bifurcation=rb.bifurcation)
        return None


def branch_alignment_offset(vmap, route, route_bif, catheter_config):
    """Signed tip offset that lines the catheter up with the on-route
    daughter at a bifurcation: magnitude d_max*cos(opening angle), sign
    from the side of the parent line the daughter leaves on."""
    node = route_bif.bifurcation.node
    node_xy = vmap.nodes[node]
    parent_tangent = geometry.tangent_at_arclength(
        route.centerline, max(0.0, route_bif.node_arc_px - 1e-6))
    e = vmap.edges[route_bif.on_route_daughter]
    poly = e.polyline if e.src == node else e.polyline[::-1]
    daughter_tangent = geometry.unit(poly[1] - poly[0])
    cosang = float(np.clip(np.dot(parent_tangent, daughter_tangent), -1.0, 1.0))
    side = geometry.cross2(parent_tangent, daughter_tangent)
    sign = 1.0 if side >= 0 else -1.0
    return sign * catheter_config.d_max_px * cosang
