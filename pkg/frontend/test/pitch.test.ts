import { describe, expect, it } from "vitest";

import {
  angleToOffset,
  distanceToPolyline,
  insideLumen,
  nearestBranch,
  offsetToAngle,
} from "../src/pitch.js";
import { sampleEvent } from "./protocol.test.js";

describe("pitch relation", () => {
  it("zero angle gives the full positive offset", () => {
    expect(angleToOffset(0, 33)).toBeCloseTo(33, 10);
  });

  it("quarter turn gives zero offset", () => {
    expect(angleToOffset(90, 33)).toBeCloseTo(0, 10);
  });

  it("half turn gives the full negative offset", () => {
    expect(angleToOffset(180, 33)).toBeCloseTo(-33, 10);
  });

  it("round trips through the inverse on [0, 180]", () => {
    for (const angle of [0, 12.5, 45, 90, 133, 180]) {
      const offset = angleToOffset(angle, 33);
      expect(offsetToAngle(offset, 33)).toBeCloseTo(angle, 6);
    }
  });

  it("inverse clamps offsets beyond the range", () => {
    expect(offsetToAngle(99, 33)).toBe(0);
    expect(offsetToAngle(-99, 33)).toBe(180);
  });
});

describe("lumen geometry", () => {
  it("distance to a segment midpoint is perpendicular", () => {
    const d = distanceToPolyline([5, 3], [[0, 0], [10, 0]]);
    expect(d).toBeCloseTo(3, 10);
  });

  it("distance clamps to segment ends", () => {
    const d = distanceToPolyline([-4, 0], [[0, 0], [10, 0]]);
    expect(d).toBeCloseTo(4, 10);
  });

  it("nearest branch picks the closer centerline", () => {
    const hit = nearestBranch([600, 250], sampleEvent().daughters);
    expect(hit?.id).toBe("branch_neg");
  });

  it("points near a centerline count as inside the lumen", () => {
    expect(insideLumen([600, 447], sampleEvent())).toBe(true);
    expect(insideLumen([100, 700], sampleEvent())).toBe(false);
  });
});
