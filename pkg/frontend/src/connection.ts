/** Reconnecting WebSocket wrapper for the /session endpoint. */

import {
  ClientMessage,
  encodeClientMessage,
  parseServerMessage,
  ServerMessage,
} from "./messages.js";

/** Minimal surface of a WebSocket, so tests can substitute a fake. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ConnectionOptions {
  url: string;
  onMessage: (msg: ServerMessage) => void;
  onStatus?: (status: "connecting" | "open" | "closed") => void;
  socketFactory?: SocketFactory;
  /** Base reconnect delay in ms; doubles per attempt up to maxBackoffMs. */
  backoffMs?: number;
  maxBackoffMs?: number;
  scheduler?: (fn: () => void, ms: number) => void;
}

export class SessionConnection {
  private socket: SocketLike | null = null;
  private open = false;
  private closedByUser = false;
  private attempts = 0;
  /** Messages queued while disconnected; replayed verbatim on reconnect. */
  private pending: string[] = [];
  sent = 0;

  constructor(private readonly opts: ConnectionOptions) {}

  connect(): void {
    this.closedByUser = false;
    this.opts.onStatus?.("connecting");
    const factory =
      this.opts.socketFactory ??
      ((url: string) => new WebSocket(url) as unknown as SocketLike);
    const socket = factory(this.opts.url);
    this.socket = socket;

    socket.onopen = () => {
      this.open = true;
      this.attempts = 0;
      this.opts.onStatus?.("open");
      const queued = this.pending.splice(0);
      for (const text of queued) {
        socket.send(text);
        this.sent += 1;
      }
    };
    socket.onmessage = (ev) => {
      const msg = parseServerMessage(ev.data);
      if (msg !== null) this.opts.onMessage(msg);
    };
    socket.onerror = () => {
      /* onclose always follows; reconnect happens there */
    };
    socket.onclose = () => {
      this.open = false;
      this.socket = null;
      this.opts.onStatus?.("closed");
      if (!this.closedByUser) this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    const base = this.opts.backoffMs ?? 250;
    const max = this.opts.maxBackoffMs ?? 8000;
    const delay = Math.min(base * 2 ** this.attempts, max);
    this.attempts += 1;
    const schedule =
      this.opts.scheduler ?? ((fn: () => void, ms: number) => setTimeout(fn, ms));
    schedule(() => {
      if (!this.closedByUser) this.connect();
    }, delay);
  }

  get isOpen(): boolean {
    return this.open;
  }

  get reconnectAttempts(): number {
    return this.attempts;
  }

  send(msg: ClientMessage): void {
    const text = encodeClientMessage(msg);
    if (this.open && this.socket !== null) {
      this.socket.send(text);
      this.sent += 1;
    } else {
      this.pending.push(text);
    }
  }

  close(): void {
    this.closedByUser = true;
    this.socket?.close();
    this.socket = null;
    this.open = false;
  }
}
