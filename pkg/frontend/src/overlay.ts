/**
 * Canvas rendering for the expert console: the rendered frame, daughter
 * centerlines, the picked target point and the orientation handle.
 */

import type { SessionView } from "./session.js";
import { offsetToAngle } from "./pitch.js";

const BRANCH_COLORS = ["#4fc3f7", "#ffb74d", "#aed581", "#f06292"];

export function drawSession(
  ctx: CanvasRenderingContext2D,
  view: SessionView,
  frame: HTMLImageElement | null,
): void {
  const { width, height } = ctx.canvas;
  ctx.fillStyle = "#111";
  ctx.fillRect(0, 0, width, height);
  if (frame !== null && frame.complete) {
    ctx.drawImage(frame, 0, 0);
  }
  const event = view.event;
  if (event === null) return;

  event.daughters.forEach((d, i) => {
    ctx.strokeStyle = BRANCH_COLORS[i % BRANCH_COLORS.length]!;
    ctx.lineWidth = d.id === view.selection.branchId ? 3 : 1.5;
    ctx.beginPath();
    d.centerline_px.forEach(([x, y], k) => {
      if (k === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  });

  const point = view.selection.point;
  if (point !== null) {
    ctx.strokeStyle = "#ffee58";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(point[0], point[1], 6, 0, 2 * Math.PI);
    ctx.stroke();
    if (view.selection.offsetPx !== null) {
      const angle = (offsetToAngle(view.selection.offsetPx, event.d_max_px) * Math.PI) / 180;
      ctx.beginPath();
      ctx.moveTo(point[0], point[1]);
      ctx.lineTo(point[0] + 30 * Math.cos(angle), point[1] - 30 * Math.sin(angle));
      ctx.stroke();
    }
  }
}

export function describeCountdown(view: SessionView): string {
  if (view.deadlineRemainingMs === null) return "";
  return `${(view.deadlineRemainingMs / 1000).toFixed(1)} s`;
}
