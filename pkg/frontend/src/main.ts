/** Browser entry point: wires the canvas, sliders, and session socket. */

import { SessionConnection } from "./connection.js";
import { OrbitControls } from "./orbit.js";
import {
  ChannelControls,
  channelsMessage,
  orbitCameraMessage,
  ViewerState,
} from "./state.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el as T;
}

function defaultUrl(): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}/session`;
}

function formatBytes(n: number): string {
  if (n >= 1 << 20) return `${(n / (1 << 20)).toFixed(1)} MiB`;
  if (n >= 1 << 10) return `${(n / (1 << 10)).toFixed(1)} KiB`;
  return `${n} B`;
}

export function startViewer(): void {
  const canvas = byId<HTMLCanvasElement>("view");
  const ctx = canvas.getContext("2d");
  if (ctx === null) throw new Error("2d canvas unavailable");

  const statsEl = byId<HTMLElement>("stats");
  const statusEl = byId<HTMLElement>("status");
  const slotSel = byId<HTMLSelectElement>("slot");
  const thresholdEl = byId<HTMLInputElement>("threshold");
  const maxAlphaEl = byId<HTMLInputElement>("maxAlpha");
  const levelLoEl = byId<HTMLInputElement>("levelLo");
  const levelHiEl = byId<HTMLInputElement>("levelHi");

  const state = new ViewerState();
  const orbit = new OrbitControls();
  const controls: ChannelControls[] = [
    { slot: 0, channel: 0, threshold: 40, maxAlpha: 0.8, levelLo: 0, levelHi: 15 },
  ];

  const drawFrame = (pngBytes: string): void => {
    const img = new Image();
    img.onload = () => {
      canvas.width = img.width;
      canvas.height = img.height;
      ctx.drawImage(img, 0, 0);
    };
    img.src = `data:image/png;base64,${pngBytes}`;
  };

  const renderStats = (): void => {
    const s = state.stats;
    if (s === null) {
      statsEl.textContent = "waiting for first frame…";
      return;
    }
    statsEl.textContent =
      `frame ${s.frameId} · ${s.requests} pending requests · ` +
      `${s.residentBricks} bricks resident (${formatBytes(s.residentBytes)}) · ` +
      `${s.renderMs.toFixed(1)} ms · ${s.converged ? "converged" : "streaming"}`;
    if (state.lastError !== null) {
      statsEl.textContent += ` · last error: ${state.lastError}`;
    }
  };

  const conn = new SessionConnection({
    url: defaultUrl(),
    onMessage: (msg) => {
      const changed = state.apply(msg);
      if (changed && state.displayed !== null) drawFrame(state.displayed.pngBytes);
      renderStats();
    },
    onStatus: (status) => {
      statusEl.textContent = status;
      statusEl.className = status;
    },
  });

  const sendCamera = (): void => {
    const p = orbit.pose;
    conn.send(orbitCameraMessage(p.angle, p.elevation, p.radius));
  };
  const sendChannels = (): void => {
    conn.send(channelsMessage(controls));
  };

  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    orbit.beginDrag(ev.clientX, ev.clientY);
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (orbit.drag(ev.clientX, ev.clientY)) sendCamera();
  });
  canvas.addEventListener("pointerup", () => orbit.endDrag());
  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    if (orbit.zoom(ev.deltaY)) sendCamera();
  });

  const active = (): ChannelControls => {
    const slot = Number(slotSel.value);
    let c = controls.find((x) => x.slot === slot);
    if (c === undefined) {
      c = { slot, channel: slot, threshold: 40, maxAlpha: 0.8, levelLo: 0, levelHi: 15 };
      controls.push(c);
    }
    return c;
  };
  const syncSliders = (): void => {
    const c = active();
    thresholdEl.value = String(c.threshold);
    maxAlphaEl.value = String(c.maxAlpha);
    levelLoEl.value = String(c.levelLo);
    levelHiEl.value = String(c.levelHi);
  };
  slotSel.addEventListener("change", syncSliders);
  thresholdEl.addEventListener("input", () => {
    active().threshold = Number(thresholdEl.value);
    sendChannels();
  });
  maxAlphaEl.addEventListener("input", () => {
    active().maxAlpha = Number(maxAlphaEl.value);
    sendChannels();
  });
  const onLevelChange = (): void => {
    const c = active();
    c.levelLo = Math.min(Number(levelLoEl.value), Number(levelHiEl.value));
    c.levelHi = Math.max(Number(levelLoEl.value), Number(levelHiEl.value));
    sendChannels();
  };
  levelLoEl.addEventListener("input", onLevelChange);
  levelHiEl.addEventListener("input", onLevelChange);

  conn.connect();
  syncSliders();
  renderStats();
  // Initial state: channels first so the first render uses them, then camera.
  sendChannels();
  sendCamera();
}

if (typeof document !== "undefined" && document.getElementById("view") !== null) {
  startViewer();
}
