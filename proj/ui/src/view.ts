// Geometry for the hand view, force bars and profile traces. Pure functions
// so the drawing code in main.ts stays thin.

import { StateMessage, Vec3 } from "./protocol.js";

/// Oblique 2.5-D projection: the palm plane (x forward, y across) seen from
/// above and in front, z drawn upwards. Returns canvas pixels.
export function project(p: Vec3, scale: number, origin: [number, number]): [number, number] {
  const [x, y, z] = p;
  return [origin[0] + scale * (y + 0.35 * x), origin[1] - scale * (z + 0.6 * x)];
}

export interface Segment {
  from: [number, number];
  to: [number, number];
  tip: string;
}

/// One stroke per fingertip from the wrist to the tip; the fingertip chain
/// is drawn through the knuckle at 45% of the reach.
export function handSegments(m: StateMessage, scale: number, origin: [number, number]): Segment[] {
  const wrist = project([0, 0, 0], scale, origin);
  const out: Segment[] = [];
  for (const f of m.fingertips) {
    const [x, y, z] = f.position;
    const knuckle = project([0.45 * x, y, 0.45 * z], scale, origin);
    const tip = project(f.position, scale, origin);
    out.push({ from: wrist, to: knuckle, tip: f.name }, { from: knuckle, to: tip, tip: f.name });
  }
  return out;
}

/// Contact force per fingertip, in fingertip order; 0 where not in contact.
export function forceBars(m: StateMessage): { tip: string; force: number }[] {
  return m.fingertips.map((f) => ({
    tip: f.name,
    force: m.contacts.filter((c) => c.fingertip === f.name).reduce((s, c) => s + c.force, 0),
  }));
}

/// Fixed-capacity rolling history of one scalar per state message.
export class Trace {
  readonly t: number[] = [];
  readonly y: number[] = [];
  constructor(readonly capacity = 300) {}

  push(t: number, y: number): void {
    this.t.push(t);
    this.y.push(y);
    if (this.t.length > this.capacity) {
      this.t.shift();
      this.y.shift();
    }
  }

  clear(): void {
    this.t.length = 0;
    this.y.length = 0;
  }

  /// Polyline in a w x h box, y range fitted to the data.
  polyline(w: number, h: number): [number, number][] {
    if (this.t.length < 2) return [];
    const t0 = this.t[0], t1 = this.t[this.t.length - 1];
    let lo = Math.min(...this.y), hi = Math.max(...this.y);
    if (hi - lo < 1e-9) (lo -= 0.5), (hi += 0.5);
    return this.t.map((t, i) => [((t - t0) / (t1 - t0)) * w, h - ((this.y[i] - lo) / (hi - lo)) * h]);
  }
}

export function mean(v: readonly number[]): number {
  return v.length ? v.reduce((s, x) => s + x, 0) / v.length : 0;
}

/// Slider presets expressed as fractions of each joint's range.
export function preset(name: "rest" | "open" | "close", lo: number[], hi: number[]): number[] {
  return lo.map((l, i) => {
    const h = hi[i];
    if (name === "rest") return Math.min(h, Math.max(l, 0));
    if (name === "open") return l;
    return l + 0.7 * (h - l);
  });
}
