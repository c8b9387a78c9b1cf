import { describe, expect, it } from "vitest";

import { SessionConnection, SocketLike } from "../src/connection.js";
import {
  clientMessageSchema,
  ServerMessage,
  serverMessageSchema,
} from "../src/messages.js";
import { channelsMessage, orbitCameraMessage, ViewerState } from "../src/state.js";

/** In-memory socket driven by a scripted server. */
class FakeSocket implements SocketLike {
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: string }) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  sentTexts: string[] = [];

  constructor(private readonly server: (sock: FakeSocket, text: string) => void) {}

  send(data: string): void {
    this.sentTexts.push(data);
    this.server(this, data);
  }

  close(): void {
    this.onclose?.();
  }

  open(): void {
    this.onopen?.();
  }

  push(msg: unknown): void {
    this.onmessage?.({ data: JSON.stringify(msg) });
  }
}

/** Scripted session server: every client message yields one frame + stats. */
function scriptedServer() {
  let frameId = 0;
  let residentBytes = 0;
  return (sock: FakeSocket, text: string): void => {
    const msg = clientMessageSchema.parse(JSON.parse(text));
    frameId += 1;
    if (msg.type === "set_channels") {
      // Changing the transfer function changes what must be resident.
      const threshold = msg.channels[0].tf[0][0];
      residentBytes = 1024 * (260 - threshold);
    } else {
      residentBytes += 512;
    }
    sock.push({ type: "frame", frameId, pngBytes: "aGVsbG8=" });
    sock.push({
      type: "stats",
      frameId,
      requests: 0,
      residentBricks: Math.floor(residentBytes / 4096),
      residentBytes,
      converged: true,
      renderMs: 2.5,
    });
  };
}

function connect(server: (sock: FakeSocket, text: string) => void) {
  const sockets: FakeSocket[] = [];
  const received: ServerMessage[] = [];
  const state = new ViewerState();
  const scheduled: Array<{ fn: () => void; ms: number }> = [];
  const conn = new SessionConnection({
    url: "ws://test/session",
    onMessage: (msg) => {
      received.push(msg);
      state.apply(msg);
    },
    socketFactory: (url) => {
      expect(url).toBe("ws://test/session");
      const sock = new FakeSocket(server);
      sockets.push(sock);
      return sock;
    },
    backoffMs: 100,
    maxBackoffMs: 1000,
    scheduler: (fn, ms) => scheduled.push({ fn, ms }),
  });
  conn.connect();
  return { conn, sockets, received, state, scheduled };
}

describe("SessionConnection viewer loop", () => {
  it("runs a camera/slider loop with monotone frames and valid messages", () => {
    const { conn, sockets, received, state } = connect(scriptedServer());
    sockets[0].open();
    expect(conn.isOpen).toBe(true);

    conn.send(orbitCameraMessage(0.4, 0.2, 2.0));
    conn.send(orbitCameraMessage(0.5, 0.2, 2.0));
    const before = state.cacheBytes;
    expect(before).toBeGreaterThan(0);

    // Slider move: lower the visibility threshold, more data becomes resident.
    conn.send(
      channelsMessage([
        { slot: 0, channel: 0, threshold: 20, maxAlpha: 0.9, levelLo: 0, levelHi: 15 },
      ]),
    );
    expect(state.cacheBytes).not.toBe(before);
    expect(state.converged).toBe(true);

    // Every outgoing message was schema-valid JSON.
    for (const text of sockets[0].sentTexts) {
      expect(clientMessageSchema.safeParse(JSON.parse(text)).success).toBe(true);
    }
    // Every incoming message was schema-valid and frames arrived in order.
    const frameIds: number[] = [];
    for (const msg of received) {
      expect(serverMessageSchema.safeParse(msg).success).toBe(true);
      if (msg.type === "frame") frameIds.push(msg.frameId);
    }
    expect(frameIds.length).toBeGreaterThanOrEqual(3);
    for (let i = 1; i < frameIds.length; i += 1) {
      expect(frameIds[i]).toBeGreaterThan(frameIds[i - 1]);
    }
    expect(state.displayed?.frameId).toBe(frameIds[frameIds.length - 1]);
  });

  it("queues messages while connecting and replays them on open", () => {
    const { conn, sockets, state } = connect(scriptedServer());
    conn.send(orbitCameraMessage(0.1, 0.0, 2.0));
    conn.send(orbitCameraMessage(0.2, 0.0, 2.0));
    expect(conn.sent).toBe(0);
    sockets[0].open();
    expect(conn.sent).toBe(2);
    expect(state.displayed?.frameId).toBe(2);
  });

  it("drops malformed server text without breaking the stream", () => {
    const { sockets, state } = connect(scriptedServer());
    sockets[0].open();
    sockets[0].onmessage?.({ data: "garbage{" });
    sockets[0].push({ type: "frame", frameId: 1 }); // missing pngBytes
    sockets[0].push({ type: "frame", frameId: 2, pngBytes: "aGk=" });
    expect(state.displayed?.frameId).toBe(2);
    expect(state.framesReceived).toBe(1);
  });

  it("reconnects with exponential backoff and replays unsent messages", () => {
    const { conn, sockets, scheduled, state } = connect(scriptedServer());
    sockets[0].open();
    sockets[0].close(); // server drop

    expect(scheduled).toHaveLength(1);
    expect(scheduled[0].ms).toBe(100);
    conn.send(orbitCameraMessage(0.3, 0.1, 2.0)); // while disconnected

    scheduled[0].fn(); // first reconnect attempt
    sockets[1].close(); // fails again before opening
    expect(scheduled).toHaveLength(2);
    expect(scheduled[1].ms).toBe(200);

    scheduled[1].fn();
    sockets[2].open(); // reconnect succeeds; queued camera message replays
    expect(conn.isOpen).toBe(true);
    expect(sockets[2].sentTexts).toHaveLength(1);
    expect(state.displayed).not.toBeNull();

    conn.close();
    expect(conn.isOpen).toBe(false);
  });
});
