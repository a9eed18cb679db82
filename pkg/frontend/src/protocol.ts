/**
 * Wire protocol shared with the expert gateway: line-delimited JSON text
 * messages over a local WebSocket.
 */

export interface Daughter {
  id: string;
  tangent_deg: number;
  centerline_px: [number, number][];
}

export interface BifurcationEvent {
  type: "bifurcation";
  episode: number;
  frame_png_base64: string;
  bifurcation_id: number;
  daughters: Daughter[];
  deadline_ms: number;
  d_max_px: number;
}

export interface PoseMessage {
  type: "pose";
  bifurcation_id: number;
  P_target: [number, number];
  D_target: number;
  branch_id: string;
}

export interface AckMessage {
  type: "ack";
  accepted: boolean;
  reason?: string;
}

export interface HeartbeatMessage {
  type: "heartbeat";
}

export type ServerMessage = BifurcationEvent | AckMessage | HeartbeatMessage;
export type ClientMessage = PoseMessage | HeartbeatMessage;

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isPoint(v: unknown): v is [number, number] {
  return Array.isArray(v) && v.length === 2 && isFiniteNumber(v[0]) && isFiniteNumber(v[1]);
}

function isDaughter(v: unknown): v is Daughter {
  if (typeof v !== "object" || v === null) return false;
  const d = v as Record<string, unknown>;
  return (
    typeof d.id === "string" &&
    isFiniteNumber(d.tangent_deg) &&
    Array.isArray(d.centerline_px) &&
    d.centerline_px.length >= 2 &&
    d.centerline_px.every(isPoint)
  );
}

export function isBifurcationEvent(v: unknown): v is BifurcationEvent {
  if (typeof v !== "object" || v === null) return false;
  const m = v as Record<string, unknown>;
  return (
    m.type === "bifurcation" &&
    isFiniteNumber(m.episode) &&
    typeof m.frame_png_base64 === "string" &&
    isFiniteNumber(m.bifurcation_id) &&
    Array.isArray(m.daughters) &&
    m.daughters.length >= 2 &&
    m.daughters.every(isDaughter) &&
    isFiniteNumber(m.deadline_ms) &&
    isFiniteNumber(m.d_max_px) &&
    m.d_max_px > 0
  );
}

export function isAck(v: unknown): v is AckMessage {
  if (typeof v !== "object" || v === null) return false;
  const m = v as Record<string, unknown>;
  return m.type === "ack" && typeof m.accepted === "boolean";
}

export function isHeartbeat(v: unknown): v is HeartbeatMessage {
  return typeof v === "object" && v !== null &&
    (v as Record<string, unknown>).type === "heartbeat";
}

export function parseServerMessage(text: string): ServerMessage | null {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    return null;
  }
  if (isBifurcationEvent(raw) || isAck(raw) || isHeartbeat(raw)) return raw;
  return null;
}

/** Validate an outgoing pose against the wire schema before sending. */
export function validatePose(pose: PoseMessage, event: BifurcationEvent): string | null {
  if (pose.type !== "pose") return "wrong message type";
  if (pose.bifurcation_id !== event.bifurcation_id) return "stale bifurcation id";
  if (!isPoint(pose.P_target)) return "target point must be a finite [x, y]";
  if (!isFiniteNumber(pose.D_target)) return "target offset must be finite";
  if (Math.abs(pose.D_target) > event.d_max_px) {
    return "target offset beyond the attainable range";
  }
  if (!event.daughters.some((d) => d.id === pose.branch_id)) {
    return "branch is not a daughter of this bifurcation";
  }
  return null;
}
