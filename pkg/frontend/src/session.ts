/**
 * Session state machine for the expert console, independent of the DOM and
 * the real socket so it can be driven in tests.
 *
 * One event is active at a time; submit is disabled while idle, while an
 * ack is pending, and after acceptance. Deadline expiry dismisses the
 * event (the server falls back to its oracle).
 */

import type {
  BifurcationEvent,
  ClientMessage,
  PoseMessage,
  ServerMessage,
} from "./protocol.js";
import { parseServerMessage, validatePose } from "./protocol.js";
import { insideLumen, nearestBranch } from "./pitch.js";

export type ConnectionState = "connecting" | "connected" | "reconnecting" | "closed";

export interface Transport {
  send(msg: ClientMessage): void;
}

export interface Clock {
  now(): number;
  setTimeout(fn: () => void, ms: number): number;
  clearTimeout(id: number): void;
  setInterval(fn: () => void, ms: number): number;
  clearInterval(id: number): void;
}

export interface Selection {
  point: [number, number] | null;
  offsetPx: number | null;
  branchId: string | null;
}

export interface SessionView {
  connection: ConnectionState;
  event: BifurcationEvent | null;
  selection: Selection;
  submitEnabled: boolean;
  awaitingAck: boolean;
  accepted: boolean;
  warning: string | null;
  deadlineRemainingMs: number | null;
}

export const HEARTBEAT_PERIOD_MS = 5000;

export class ExpertSession {
  private connection: ConnectionState = "connecting";
  private event: BifurcationEvent | null = null;
  private selection: Selection = { point: null, offsetPx: null, branchId: null };
  private awaitingAck = false;
  private accepted = false;
  private warning: string | null = null;
  private deadlineAt: number | null = null;
  private deadlineTimer: number | null = null;
  private heartbeatTimer: number | null = null;
  private submittedFor: number | null = null;
  private listeners: Array<(view: SessionView) => void> = [];

  constructor(private transport: Transport, private clock: Clock) {}

  onChange(fn: (view: SessionView) => void): void {
    this.listeners.push(fn);
  }

  private notify(): void {
    const view = this.view();
    for (const fn of this.listeners) fn(view);
  }

  view(): SessionView {
    return {
      connection: this.connection,
      event: this.event,
      selection: { ...this.selection },
      submitEnabled: this.submitEnabled(),
      awaitingAck: this.awaitingAck,
      accepted: this.accepted,
      warning: this.warning,
      deadlineRemainingMs:
        this.deadlineAt === null ? null : Math.max(0, this.deadlineAt - this.clock.now()),
    };
  }

  private submitEnabled(): boolean {
    return (
      this.connection === "connected" &&
      this.event !== null &&
      !this.awaitingAck &&
      !this.accepted &&
      this.selection.point !== null &&
      this.selection.offsetPx !== null &&
      this.selection.branchId !== null &&
      this.warning === null
    );
  }

  // -- connection lifecycle ---------------------------------------------------

  setConnection(state: ConnectionState): void {
    this.connection = state;
    if (state === "connected") {
      this.startHeartbeat();
    } else {
      this.stopHeartbeat();
      if (state !== "connecting" && this.event !== null) {
        // in-flight event is abandoned; the server falls back to its oracle
        this.clearEvent();
      }
    }
    this.notify();
  }

  private startHeartbeat(): void {
    this.stopHeartbeat();
    this.heartbeatTimer = this.clock.setInterval(() => {
      this.transport.send({ type: "heartbeat" });
    }, HEARTBEAT_PERIOD_MS);
  }

  private stopHeartbeat(): void {
    if (this.heartbeatTimer !== null) {
      this.clock.clearInterval(this.heartbeatTimer);
      this.heartbeatTimer = null;
    }
  }

  // -- inbound messages ---------------------------------------------------------

  handleRaw(text: string): void {
    const msg = parseServerMessage(text);
    if (msg === null) {
      // malformed messages are dropped, never crash the session
      return;
    }
    this.handleMessage(msg);
  }

  handleMessage(msg: ServerMessage): void {
    switch (msg.type) {
      case "heartbeat":
        return;
      case "bifurcation":
        this.presentEvent(msg);
        return;
      case "ack":
        if (!this.awaitingAck) return;
        this.awaitingAck = false;
        if (msg.accepted) {
          this.accepted = true;
        } else {
          this.warning = msg.reason ?? "pose rejected";
          this.submittedFor = null; // re-enable editing
        }
        this.notify();
        return;
    }
  }

  presentEvent(event: BifurcationEvent): void {
    this.clearEvent();
    this.event = event;
    this.deadlineAt = this.clock.now() + event.deadline_ms;
    this.deadlineTimer = this.clock.setTimeout(() => {
      this.clearEvent();
      this.notify();
    }, event.deadline_ms);
    this.notify();
  }

  private clearEvent(): void {
    if (this.deadlineTimer !== null) {
      this.clock.clearTimeout(this.deadlineTimer);
      this.deadlineTimer = null;
    }
    this.event = null;
    this.deadlineAt = null;
    this.selection = { point: null, offsetPx: null, branchId: null };
    this.awaitingAck = false;
    this.accepted = false;
    this.warning = null;
    this.submittedFor = null;
  }

  // -- operator input -----------------------------------------------------------

  clickPoint(point: [number, number]): void {
    if (this.event === null || this.accepted) return;
    if (!insideLumen(point, this.event)) {
      this.warning = "outside the vessel lumen";
      this.selection.point = null;
      this.notify();
      return;
    }
    const hit = nearestBranch(point, this.event.daughters);
    this.warning = null;
    this.selection.point = point;
    this.selection.branchId = hit ? hit.id : null;
    this.notify();
  }

  dragOffset(offsetPx: number): void {
    if (this.event === null || this.accepted) return;
    const limit = this.event.d_max_px;
    this.selection.offsetPx = Math.min(limit, Math.max(-limit, offsetPx));
    this.notify();
  }

  submit(): PoseMessage | null {
    if (!this.submitEnabled() || this.event === null) return null;
    if (this.submittedFor === this.event.bifurcation_id) return null;
    const pose: PoseMessage = {
      type: "pose",
      bifurcation_id: this.event.bifurcation_id,
      P_target: this.selection.point as [number, number],
      D_target: this.selection.offsetPx as number,
      branch_id: this.selection.branchId as string,
    };
    const problem = validatePose(pose, this.event);
    if (problem !== null) {
      this.warning = problem;
      this.notify();
      return null;
    }
    this.submittedFor = this.event.bifurcation_id;
    this.awaitingAck = true;
    this.transport.send(pose);
    this.notify();
    return pose;
  }
}
