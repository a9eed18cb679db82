"""Planar vessel phantom: a centerline graph with lumen radii, one entry
node, zero or more bifurcations, and a target disk.

Phantom files are YAML-style structured text (``format: 1``), see
``fixtures.py`` for the canonical examples.
"""

from dataclasses import dataclass, field

import numpy as np
import yaml

from . import geometry

FORMAT_VERSION = 1


class PhantomError(Exception):
    """Raised for unparsable or invalid phantom files."""


@dataclass(frozen=True)
class Edge:
    eid: str
    src: int
    dst: int
    radius_px: float
    polyline: np.ndarray  # (n, 2), first point = src node, last = dst node


@dataclass(frozen=True)
class Bifurcation:
    node: int
    parent: str
    daughters: tuple


@dataclass(frozen=True)
class Target:
    center: np.ndarray
    radius_px: float


@dataclass
class VesselMap:
    canvas_px: tuple
    nodes: np.ndarray  # (n, 2)
    edges: dict  # eid -> Edge, insertion-ordered
    bifurcations: list
    entry: int
    target: Target
    _adjacency: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        adj = {i: [] for i in range(len(self.nodes))}
        for e in self.edges.values():
            adj[e.src].append(e.eid)
            adj[e.dst].append(e.eid)
        self._adjacency = adj

    def edges_at(self, node):
        return [self.edges[eid] for eid in self._adjacency[node]]

    def bifurcation_at(self, node):
        for b in self.bifurcations:
            if b.node == node:
                return b
        return None


# ---------------------------------------------------------------------------
# Loading and validation
# ---------------------------------------------------------------------------

def _straight_polyline(p0, p1):
    return np.array([p0, p1], dtype=np.float64)


def parse_vessel_map(text, source="<string>"):
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise PhantomError(f"{source}: not parseable: {exc}") from exc
    if not isinstance(raw, dict):
        raise PhantomError(f"{source}: expected a mapping at top level")
    if raw.get("format") != FORMAT_VERSION:
        raise PhantomError(
            f"{source}: unsupported format {raw.get('format')!r}, expected {FORMAT_VERSION}")

    try:
        canvas = tuple(float(v) for v in raw["canvas"])
        nodes = np.array(raw["nodes"], dtype=np.float64)
        entry = int(raw["entry"])
        target = Target(
            center=np.array(raw["target"]["center"], dtype=np.float64),
            radius_px=float(raw["target"]["radius"]),
        )
        edges = {}
        for spec in raw["edges"]:
            eid = str(spec["id"])
            if eid in edges:
                raise PhantomError(f"{source}: duplicate edge id {eid!r}")
            src, dst = int(spec["from"]), int(spec["to"])
            poly = spec.get("polyline")
            poly = (np.array(poly, dtype=np.float64) if poly is not None
                    else _straight_polyline(nodes[src], nodes[dst]))
            edges[eid] = Edge(eid, src, dst, float(spec["radius"]), poly)
        bifs = [
            Bifurcation(int(b["node"]), str(b["parent"]),
                        tuple(str(d) for d in b["daughters"]))
            for b in raw.get("bifurcations", [])
        ]
    except PhantomError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise PhantomError(f"{source}: malformed field: {exc}") from exc

    vmap = VesselMap(canvas, nodes, edges, bifs, entry, target)
    validate_vessel_map(vmap, source)
    return vmap


def load_vessel_map(path):
    """Load and validate a phantom file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_vessel_map(fh.read(), source=str(path))


def validate_vessel_map(vmap, source="<map>"):
    n = len(vmap.nodes)
    if n == 0:
        raise PhantomError(f"{source}: no nodes")
    if vmap.nodes.ndim != 2 or vmap.nodes.shape[1] != 2:
        raise PhantomError(f"{source}: nodes must be 2D points")
    if not (0 <= vmap.entry < n):
        raise PhantomError(f"{source}: entry node {vmap.entry} out of range")
    if vmap.target.radius_px <= 0:
        raise PhantomError(f"{source}: target radius must be positive")

    for e in vmap.edges.values():
        if not (0 <= e.src < n and 0 <= e.dst < n):
            raise PhantomError(f"{source}: edge {e.eid!r} references missing node")
        if e.radius_px <= 0:
            raise PhantomError(f"{source}: edge {e.eid!r} has non-positive radius")
        if len(e.polyline) < 2:
            raise PhantomError(f"{source}: edge {e.eid!r} polyline too short")
        for endpoint, node in ((e.polyline[0], e.src), (e.polyline[-1], e.dst)):
            if np.hypot(*(endpoint - vmap.nodes[node])) > 1e-6:
                raise PhantomError(
                    f"{source}: edge {e.eid!r} polyline does not end on its nodes")

    # connectivity from the entry node
    seen = {vmap.entry}
    stack = [vmap.entry]
    while stack:
        cur = stack.pop()
        for e in vmap.edges_at(cur):
            nxt = e.dst if e.src == cur else e.src
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    if len(seen) != n:
        missing = sorted(set(range(n)) - seen)
        raise PhantomError(f"{source}: graph disconnected, unreachable nodes {missing}")

    for b in vmap.bifurcations:
        if b.parent not in vmap.edges:
            raise PhantomError(f"{source}: bifurcation at node {b.node} names "
                               f"missing parent edge {b.parent!r}")
        if len(b.daughters) < 2:
            raise PhantomError(f"{source}: bifurcation at node {b.node} needs >= 2 daughters")
        incident = {e.eid for e in vmap.edges_at(b.node)}
        for d in b.daughters:
            if d not in vmap.edges:
                raise PhantomError(f"{source}: bifurcation at node {b.node} names "
                                   f"missing daughter edge {d!r}")
            if d not in incident:
                raise PhantomError(f"{source}: daughter edge {d!r} not incident "
                                   f"to bifurcation node {b.node}")
        if b.parent not in incident:
            raise PhantomError(f"{source}: parent edge {b.parent!r} not incident "
                               f"to bifurcation node {b.node}")

    # the target disk center must lie inside some lumen
    dist = min(geometry.project_to_polyline(e.polyline, vmap.target.center)[0]
               - e.radius_px for e in vmap.edges.values())
    if dist > 0:
        raise PhantomError(f"{source}: target center lies outside every lumen")


# ---------------------------------------------------------------------------
# Route: the planned path from the entry node to the target
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RouteBifurcation:
    bifurcation: Bifurcation
    node_arc_px: float      # arc position of the node along the route centerline
    on_route_daughter: str  # daughter edge the route continues into


@dataclass
class Route:
    edge_ids: list
    centerline: np.ndarray       # (n, 2) concatenated oriented polylines
    radii: np.ndarray            # per-vertex lumen radius
    bifurcations: list           # RouteBifurcation in traversal order
    target_arc_px: float

    @property
    def length_px(self):
        return geometry.polyline_length(self.centerline)


def _oriented(edge, from_node):
    poly = edge.polyline
    return poly if edge.src == from_node else poly[::-1]


def _edge_path(vmap, start, goal_edge_id):
    """Node/edge BFS path from start node to either endpoint of the goal edge."""
    goal = vmap.edges[goal_edge_id]
    prev = {start: None}
    queue = [start]
    while queue:
        cur = queue.pop(0)
        for e in vmap.edges_at(cur):
            nxt = e.dst if e.src == cur else e.src
            if nxt not in prev:
                prev[nxt] = (cur, e.eid)
                queue.append(nxt)
    for end in (goal.src, goal.dst):
        if end in prev:
            path = []
            node = end
            while prev[node] is not None:
                node, eid = prev[node]
                path.append(eid)
            path.reverse()
            if goal_edge_id not in path:
                path.append(goal_edge_id)
            return path
    raise PhantomError(f"no path from entry to edge {goal_edge_id!r}")


def plan_route(vmap):
    """Route from the entry node to the edge holding the target center."""
    # target edge = lumen containing the target center, nearest centerline wins
    best = min(vmap.edges.values(),
               key=lambda e: geometry.project_to_polyline(e.polyline, vmap.target.center)[0]
               - e.radius_px)
    edge_ids = _edge_path(vmap, vmap.entry, best.eid)

    pts = []
    radii = []
    node = vmap.entry
    node_arcs = {}
    arc = 0.0
    for eid in edge_ids:
        e = vmap.edges[eid]
        poly = _oriented(e, node)
        if pts:
            poly = poly[1:]
        pts.append(poly)
        radii.append(np.full(len(poly), e.radius_px))
        node_arcs[node] = arc
        arc += geometry.polyline_length(_oriented(e, node))
        node = e.dst if e.src == node else e.src
    node_arcs[node] = arc
    centerline = np.vstack(pts)
    radii = np.concatenate(radii)

    route_bifs = []
    covered = set(edge_ids)
    for i, eid in enumerate(edge_ids[:-1]):
        e = vmap.edges[eid]
        for b in vmap.bifurcations:
            if b.parent == eid and edge_ids[i + 1] in b.daughters:
                route_bifs.append(RouteBifurcation(
                    bifurcation=b,
                    node_arc_px=node_arcs[b.node],
                    on_route_daughter=edge_ids[i + 1],
                ))
    route_bifs.sort(key=lambda rb: rb.node_arc_px)

    _, target_arc, _ = geometry.project_to_polyline(centerline, vmap.target.center)
    return Route(list(edge_ids), centerline, radii, route_bifs, float(target_arc))
