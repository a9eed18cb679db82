"""Expert target poses at bifurcations and the demonstration store.

The geometric oracle stands in for a human operator: it picks the on-route
daughter, a point a fixed distance into it, and the tip offset whose pitch
lines the catheter up with that branch.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from . import geometry
from .env import branch_alignment_offset

DEFAULT_ADVANCE_MM = 8.0


class DemoStoreError(Exception):
    """Raised for unreadable demonstration files."""


@dataclass(frozen=True)
class TargetPose:
    offset_px: float        # signed lateral tip offset to reach
    point_px: np.ndarray    # 2D pixel target for the tip
    branch_id: str
    source: str             # "oracle" | "human"


def oracle_target_pose(vmap, node, route, catheter_config,
                       advance_mm=DEFAULT_ADVANCE_MM):
    """Deterministic target pose for a bifurcation node on the planned
    route; ``node`` may also be a BifurcationEvent."""
    node = getattr(node, "node", node)
    route_bif = None
    for rb in route.bifurcations:
        if rb.bifurcation.node == node:
            route_bif = rb
            break
    if route_bif is None:
        raise ValueError(f"bifurcation node {node} is not on the route")
    branch = route_bif.on_route_daughter
    edge = vmap.edges[branch]
    poly = edge.polyline if edge.src == node else edge.polyline[::-1]
    advance_px = advance_mm * catheter_config.px_per_mm
    point = geometry.point_at_arclength(poly, advance_px)
    offset = branch_alignment_offset(vmap, route, route_bif, catheter_config)
    return TargetPose(offset_px=float(offset), point_px=point,
                      branch_id=branch, source="oracle")


# ---------------------------------------------------------------------------
# Demonstration store: JSON lines of (observation, action) pairs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DemoRecord:
    observation: np.ndarray
    action: np.ndarray
    source: str
    episode: int

    def to_json(self):
        return json.dumps({
            "s": [float(v) for v in self.observation],
            "a": [float(v) for v in self.action],
            "source": self.source,
            "episode": int(self.episode),
        }, separators=(", ", ": "))

    @staticmethod
    def from_json(text):
        raw = json.loads(text)
        rec = DemoRecord(
            observation=np.array(raw["s"], dtype=np.float64),
            action=np.array(raw["a"], dtype=np.float64),
            source=str(raw["source"]),
            episode=int(raw["episode"]),
        )
        if np.any(np.abs(rec.action) > 1.0):
            raise ValueError("action out of bounds")
        return rec


class DemoStore:
    """Append-only, file-backed sequence of demonstration records."""

    def __init__(self, path=None):
        self.path = str(path) if path is not None else None
        self.records = []
        if self.path and os.path.exists(self.path):
            self.records = list(load_demonstrations(self.path).records)

    def __len__(self):
        return len(self.records)

    def append(self, records):
        records = list(records)
        if self.path:
            with open(self.path, "a", encoding="utf-8") as fh:
                for rec in records:
                    fh.write(rec.to_json() + "\n")
        self.records.extend(records)


def record_demonstration(store, records):
    """Append records to the store (file-backed when it has a path)."""
    store.append(records)
    return store


def load_demonstrations(path):
    """Rebuild a DemoStore from file; errors name the offending line."""
    store = DemoStore()
    store.path = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            if not line.endswith("\n"):
                raise DemoStoreError(f"{path}:{lineno}: truncated record")
            try:
                store.records.append(DemoRecord.from_json(line))
            except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
                raise DemoStoreError(f"{path}:{lineno}: bad record: {exc}") from exc
    return store
