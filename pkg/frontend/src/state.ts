/** Viewer-side session state: outgoing settings and latest-wins frame intake. */

import {
  ChannelSpec,
  ClientMessage,
  ServerMessage,
  StatsMessage,
  TfPoint,
} from "./messages.js";

export interface ChannelControls {
  slot: number;
  channel: number;
  threshold: number; // scalar below which the channel is invisible
  maxAlpha: number;
  levelLo: number;
  levelHi: number;
}

export function rampTf(threshold: number, maxAlpha: number): TfPoint[] {
  const t = Math.min(Math.max(threshold, 0), 254);
  return [
    [t, [0, 0, 0, 0]],
    [255, [1, 1, 1, Math.min(Math.max(maxAlpha, 0), 1)]],
  ];
}

export function channelsMessage(controls: ChannelControls[]): ClientMessage {
  const channels: ChannelSpec[] = controls.map((c) => ({
    slot: c.slot,
    channel: c.channel,
    tf: rampTf(c.threshold, c.maxAlpha),
    levelRange: [c.levelLo, c.levelHi],
  }));
  return { type: "set_channels", channels };
}

export function orbitCameraMessage(
  angle: number,
  elevation: number,
  radius: number,
): ClientMessage {
  return {
    type: "set_camera",
    position: [
      0.5 + radius * Math.cos(angle),
      0.5 + elevation,
      0.5 + radius * Math.sin(angle),
    ],
    target: [0.5, 0.5, 0.5],
    up: [0, 1, 0],
    fov: 45,
  };
}

export interface DisplayedFrame {
  frameId: number;
  pngBytes: string;
}

/**
 * Accumulates server messages. Frames apply latest-wins by frameId so a
 * stale frame arriving late never replaces a newer image.
 */
export class ViewerState {
  displayed: DisplayedFrame | null = null;
  stats: StatsMessage | null = null;
  lastError: string | null = null;
  framesReceived = 0;
  staleFramesDropped = 0;

  /** Returns true when the displayed image changed. */
  apply(msg: ServerMessage): boolean {
    switch (msg.type) {
      case "frame": {
        this.framesReceived += 1;
        if (this.displayed !== null && msg.frameId <= this.displayed.frameId) {
          this.staleFramesDropped += 1;
          return false;
        }
        this.displayed = { frameId: msg.frameId, pngBytes: msg.pngBytes };
        return true;
      }
      case "stats": {
        if (this.stats === null || msg.frameId >= this.stats.frameId) {
          this.stats = msg;
        }
        return false;
      }
      case "error": {
        this.lastError = msg.message;
        return false;
      }
    }
  }

  get converged(): boolean {
    return this.stats !== null && this.stats.converged;
  }

  get cacheBytes(): number {
    return this.stats === null ? 0 : this.stats.residentBytes;
  }
}
