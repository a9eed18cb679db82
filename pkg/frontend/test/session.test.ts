import { beforeEach, describe, expect, it, vi } from "vitest";

import { ExpertSession, HEARTBEAT_PERIOD_MS } from "../src/session.js";
import type { Clock, Transport } from "../src/session.js";
import type { ClientMessage } from "../src/protocol.js";
import { sampleEvent } from "./protocol.test.js";

class FakeTransport implements Transport {
  sent: ClientMessage[] = [];
  send(msg: ClientMessage): void {
    this.sent.push(msg);
  }
  poses() {
    return this.sent.filter((m) => m.type === "pose");
  }
}

function fakeClock(): Clock {
  return {
    now: () => Date.now(),
    setTimeout: (fn, ms) => setTimeout(fn, ms) as unknown as number,
    clearTimeout: (id) => clearTimeout(id),
    setInterval: (fn, ms) => setInterval(fn, ms) as unknown as number,
    clearInterval: (id) => clearInterval(id),
  };
}

describe("expert session", () => {
  let transport: FakeTransport;
  let session: ExpertSession;

  beforeEach(() => {
    vi.useFakeTimers();
    transport = new FakeTransport();
    session = new ExpertSession(transport, fakeClock());
    session.setConnection("connected");
  });

  function deliverEvent() {
    session.handleRaw(JSON.stringify(sampleEvent()));
  }

  function makeValidSelection() {
    session.clickPoint([500, 330]);
    session.dragOffset(-20);
  }

  it("starts idle with submit disabled", () => {
    const view = session.view();
    expect(view.event).toBeNull();
    expect(view.submitEnabled).toBe(false);
  });

  it("presents an event with both daughters selectable", () => {
    deliverEvent();
    const view = session.view();
    expect(view.event?.daughters.map((d) => d.id))
      .toEqual(["branch_pos", "branch_neg"]);
    expect(view.deadlineRemainingMs).toBeGreaterThan(9000);
  });

  it("click inside the lumen selects the nearest branch", () => {
    deliverEvent();
    session.clickPoint([600, 250]);
    const view = session.view();
    expect(view.selection.branchId).toBe("branch_neg");
    expect(view.warning).toBeNull();
  });

  it("click outside the lumen warns and disables submit", () => {
    deliverEvent();
    session.clickPoint([100, 700]);
    const view = session.view();
    expect(view.warning).toMatch(/lumen/);
    expect(view.submitEnabled).toBe(false);
  });

  it("drag clamps the offset to the attainable range", () => {
    deliverEvent();
    session.dragOffset(500);
    expect(session.view().selection.offsetPx).toBe(33.0);
    session.dragOffset(-500);
    expect(session.view().selection.offsetPx).toBe(-33.0);
  });

  it("submits a schema-valid pose and blocks double submission", () => {
    deliverEvent();
    makeValidSelection();
    expect(session.view().submitEnabled).toBe(true);
    const pose = session.submit();
    expect(pose).not.toBeNull();
    expect(transport.poses()).toHaveLength(1);
    expect(pose!.bifurcation_id).toBe(1);
    expect(pose!.branch_id).toBe("branch_neg");
    // double submit on the same event id is a no-op
    expect(session.submit()).toBeNull();
    expect(transport.poses()).toHaveLength(1);
  });

  it("accepted ack locks the form", () => {
    deliverEvent();
    makeValidSelection();
    session.submit();
    session.handleRaw('{"type": "ack", "accepted": true}');
    const view = session.view();
    expect(view.accepted).toBe(true);
    expect(view.submitEnabled).toBe(false);
  });

  it("rejected ack surfaces the reason and re-enables editing", () => {
    deliverEvent();
    makeValidSelection();
    session.submit();
    session.handleRaw(
      '{"type": "ack", "accepted": false, "reason": "target point outside the branch lumen"}');
    const view = session.view();
    expect(view.warning).toMatch(/lumen/);
    expect(view.awaitingAck).toBe(false);
    // editing again clears the warning and allows a fresh submit
    session.clickPoint([600, 250]);
    session.dragOffset(-10);
    expect(session.view().submitEnabled).toBe(true);
    expect(session.submit()).not.toBeNull();
    expect(transport.poses()).toHaveLength(2);
  });

  it("deadline expiry dismisses the overlay", () => {
    deliverEvent();
    makeValidSelection();
    vi.advanceTimersByTime(10_001);
    const view = session.view();
    expect(view.event).toBeNull();
    expect(view.submitEnabled).toBe(false);
  });

  it("malformed messages never crash the session", () => {
    deliverEvent();
    session.handleRaw("garbage{{{");
    session.handleRaw('{"type": "mystery"}');
    expect(session.view().event).not.toBeNull();
  });

  it("heartbeats are sent every five seconds while connected", () => {
    vi.advanceTimersByTime(3 * HEARTBEAT_PERIOD_MS + 10);
    const beats = transport.sent.filter((m) => m.type === "heartbeat");
    expect(beats).toHaveLength(3);
  });

  it("disconnection abandons the in-flight event", () => {
    deliverEvent();
    makeValidSelection();
    session.setConnection("reconnecting");
    const view = session.view();
    expect(view.event).toBeNull();
    expect(view.connection).toBe("reconnecting");
    // no heartbeats while down
    transport.sent.length = 0;
    vi.advanceTimersByTime(2 * HEARTBEAT_PERIOD_MS);
    expect(transport.sent).toHaveLength(0);
  });

  it("a new event replaces the previous one", () => {
    deliverEvent();
    const second = { ...sampleEvent(), bifurcation_id: 2 };
    session.handleRaw(JSON.stringify(second));
    expect(session.view().event?.bifurcation_id).toBe(2);
    expect(session.view().selection.point).toBeNull();
  });
});
