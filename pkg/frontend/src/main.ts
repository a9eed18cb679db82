/** Expert console entry point: connect, render, forward pointer input. */

import { GatewayClient } from "./client.js";
import { angleToOffset } from "./pitch.js";
import { ExpertSession } from "./session.js";
import type { SessionView } from "./session.js";
import { drawSession, describeCountdown } from "./overlay.js";

const params = new URLSearchParams(window.location.search);
const url = params.get("gateway") ?? "ws://127.0.0.1:8765/";

const canvas = document.getElementById("frame") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const status = document.getElementById("status")!;
const countdown = document.getElementById("countdown")!;
const warning = document.getElementById("warning")!;
const submitBtn = document.getElementById("submit") as HTMLButtonElement;

const clock = {
  now: () => Date.now(),
  setTimeout: (fn: () => void, ms: number) => window.setTimeout(fn, ms),
  clearTimeout: (id: number) => window.clearTimeout(id),
  setInterval: (fn: () => void, ms: number) => window.setInterval(fn, ms),
  clearInterval: (id: number) => window.clearInterval(id),
};

let frameImage: HTMLImageElement | null = null;
let dragging = false;

const client = new GatewayClient(url, {
  onState: (state) => session.setConnection(state),
  onMessage: (text) => session.handleRaw(text),
});
const session = new ExpertSession(client, clock);

session.onChange((view: SessionView) => {
  if (view.event !== null && frameImage === null) {
    frameImage = new Image();
    frameImage.src = `data:image/png;base64,${view.event.frame_png_base64}`;
    frameImage.onload = () => drawSession(ctx, session.view(), frameImage);
  }
  if (view.event === null) frameImage = null;
  status.textContent = view.connection;
  countdown.textContent = describeCountdown(view);
  warning.textContent = view.warning ?? "";
  submitBtn.disabled = !view.submitEnabled;
  drawSession(ctx, view, frameImage);
});

canvas.addEventListener("pointerdown", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const point: [number, number] = [ev.clientX - rect.left, ev.clientY - rect.top];
  session.clickPoint(point);
  dragging = true;
});

canvas.addEventListener("pointermove", (ev) => {
  const view = session.view();
  if (!dragging || view.event === null || view.selection.point === null) return;
  const rect = canvas.getBoundingClientRect();
  const dx = ev.clientX - rect.left - view.selection.point[0];
  const dy = view.selection.point[1] - (ev.clientY - rect.top);
  const angleDeg = (Math.atan2(dy, dx) * 180) / Math.PI;
  session.dragOffset(angleToOffset(angleDeg, view.event.d_max_px));
});

canvas.addEventListener("pointerup", () => {
  dragging = false;
});

submitBtn.addEventListener("click", () => session.submit());

setInterval(() => {
  countdown.textContent = describeCountdown(session.view());
}, 200);

client.connect();
