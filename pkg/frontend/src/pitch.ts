/**
 * Geometry for the pose overlay: the drag handle angle maps to a signed
 * lateral tip offset through the pitch relation offset = d_max * cos(angle),
 * and clicks are checked against the daughter centerlines.
 */

import type { BifurcationEvent, Daughter } from "./protocol.js";

export function angleToOffset(angleDeg: number, dMaxPx: number): number {
  return dMaxPx * Math.cos((angleDeg * Math.PI) / 180);
}

export function offsetToAngle(offsetPx: number, dMaxPx: number): number {
  const c = Math.min(1, Math.max(-1, offsetPx / dMaxPx));
  return (Math.acos(c) * 180) / Math.PI;
}

export function distanceToPolyline(
  point: [number, number],
  polyline: [number, number][],
): number {
  let best = Infinity;
  for (let i = 0; i + 1 < polyline.length; i++) {
    const a = polyline[i]!;
    const b = polyline[i + 1]!;
    const dx = b[0] - a[0];
    const dy = b[1] - a[1];
    const len2 = dx * dx + dy * dy;
    let t = 0;
    if (len2 > 0) {
      t = ((point[0] - a[0]) * dx + (point[1] - a[1]) * dy) / len2;
      t = Math.min(1, Math.max(0, t));
    }
    const cx = a[0] + t * dx;
    const cy = a[1] + t * dy;
    best = Math.min(best, Math.hypot(point[0] - cx, point[1] - cy));
  }
  return best;
}

export interface BranchHit {
  id: string;
  distance: number;
}

export function nearestBranch(
  point: [number, number],
  daughters: Daughter[],
): BranchHit | null {
  let best: BranchHit | null = null;
  for (const d of daughters) {
    const dist = distanceToPolyline(point, d.centerline_px);
    if (best === null || dist < best.distance) {
      best = { id: d.id, distance: dist };
    }
  }
  return best;
}

/** Display-side lumen tolerance: the server re-validates authoritatively. */
export const LUMEN_CLICK_TOLERANCE_PX = 40;

export function insideLumen(point: [number, number], event: BifurcationEvent): boolean {
  const hit = nearestBranch(point, event.daughters);
  return hit !== null && hit.distance <= LUMEN_CLICK_TOLERANCE_PX;
}
