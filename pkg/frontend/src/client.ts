/**
 * WebSocket transport with exponential-backoff reconnection. The session
 * only sees `send` plus connection-state changes and raw messages.
 */

import type { ClientMessage } from "./protocol.js";

export interface ClientHandlers {
  onState(state: "connecting" | "connected" | "reconnecting" | "closed"): void;
  onMessage(text: string): void;
}

const BACKOFF_MS = [500, 1000, 2000, 4000, 8000, 10000];

export class GatewayClient {
  private socket: WebSocket | null = null;
  private attempts = 0;
  private closed = false;

  constructor(private url: string, private handlers: ClientHandlers) {}

  connect(): void {
    this.closed = false;
    this.open("connecting");
  }

  private open(state: "connecting" | "reconnecting"): void {
    this.handlers.onState(state);
    const socket = new WebSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
      this.handlers.onState("connected");
    };
    socket.onmessage = (ev: MessageEvent) => {
      if (typeof ev.data === "string") this.handlers.onMessage(ev.data);
    };
    socket.onclose = () => {
      this.socket = null;
      if (this.closed) {
        this.handlers.onState("closed");
        return;
      }
      const delay = BACKOFF_MS[Math.min(this.attempts, BACKOFF_MS.length - 1)]!;
      this.attempts += 1;
      setTimeout(() => {
        if (!this.closed) this.open("reconnecting");
      }, delay);
    };
    socket.onerror = () => {
      socket.close();
    };
  }

  send(msg: ClientMessage): void {
    if (this.socket !== null && this.socket.readyState === WebSocket.OPEN) {
      this.socket.send(JSON.stringify(msg));
    }
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}
