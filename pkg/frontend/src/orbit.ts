/** Orbit camera model: drag to rotate, wheel to zoom. */

export interface OrbitPose {
  angle: number; // radians around the vertical axis
  elevation: number; // vertical offset from the volume center
  radius: number;
}

export interface OrbitLimits {
  minRadius: number;
  maxRadius: number;
  maxElevation: number;
}

export const DEFAULT_LIMITS: OrbitLimits = {
  minRadius: 1.2,
  maxRadius: 6.0,
  maxElevation: 1.5,
};

export class OrbitControls {
  pose: OrbitPose = { angle: 0.6, elevation: 0.35, radius: 2.2 };
  private dragging = false;
  private lastX = 0;
  private lastY = 0;

  constructor(
    private readonly limits: OrbitLimits = DEFAULT_LIMITS,
    /** radians of rotation per pixel of horizontal drag */
    private readonly rotateSpeed = 0.01,
    private readonly elevateSpeed = 0.005,
    private readonly zoomSpeed = 0.0015,
  ) {}

  beginDrag(x: number, y: number): void {
    this.dragging = true;
    this.lastX = x;
    this.lastY = y;
  }

  /** Returns true when the pose changed (caller should push a camera update). */
  drag(x: number, y: number): boolean {
    if (!this.dragging) return false;
    const dx = x - this.lastX;
    const dy = y - this.lastY;
    this.lastX = x;
    this.lastY = y;
    if (dx === 0 && dy === 0) return false;
    const p = this.pose;
    const twoPi = 2 * Math.PI;
    p.angle = (((p.angle + dx * this.rotateSpeed) % twoPi) + twoPi) % twoPi;
    p.elevation = clamp(
      p.elevation + dy * this.elevateSpeed,
      -this.limits.maxElevation,
      this.limits.maxElevation,
    );
    return true;
  }

  endDrag(): void {
    this.dragging = false;
  }

  /** Positive delta zooms out. Returns true when the pose changed. */
  zoom(delta: number): boolean {
    const before = this.pose.radius;
    this.pose.radius = clamp(
      this.pose.radius * (1 + delta * this.zoomSpeed),
      this.limits.minRadius,
      this.limits.maxRadius,
    );
    return this.pose.radius !== before;
  }
}

function clamp(v: number, lo: number, hi: number): number {
  return Math.min(Math.max(v, lo), hi);
}
