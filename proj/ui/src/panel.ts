// Panel state: connection, slider values, outbound commands and the
// recording buffer. No DOM here; main.ts wires it to the page.

import { ControllerName, decodeServerMessage, encodeCommand, ProtocolError, StateMessage } from "./protocol.js";

/// The subset of the browser WebSocket the panel uses.
export interface SocketLike {
  readonly readyState: number;
  send(data: string): void;
  close(): void;
  onopen: ((ev: any) => void) | null;
  onmessage: ((ev: { data: any }) => void) | null;
  onclose: ((ev: any) => void) | null;
  onerror: ((ev: any) => void) | null;
}

export type Status = "connecting" | "connected" | "disconnected";

export interface PanelOptions {
  connect: () => SocketLike;
  now?: () => number;                                   // ms
  setTimer?: (fn: () => void, ms: number) => unknown;
  controlPeriodMs?: number;                             // outbound commands never faster than this
  retryMs?: number;
}

export interface RecordedCommand {
  t: number;  // s since the first recorded command
  q_d: number[];
}

const OPEN = 1;

export class Panel {
  status: Status = "disconnected";
  /// Latest accepted state; the renderer reads it at its own pace.
  latest: StateMessage | null = null;
  sliders: number[] | null = null;
  lo: number[] = [];
  hi: number[] = [];
  controller: ControllerName | null = null;
  readonly recording: RecordedCommand[] = [];
  lastError: string | null = null;
  sent = 0;
  dropped = 0;

  private socket: SocketLike | null = null;
  private dirty = false;
  private pendingController: ControllerName | undefined;
  private pendingReset = false;
  private lastSentMs = -Infinity;
  private lastT = -Infinity;
  private recordStartMs: number | null = null;
  private stopped = false;
  private readonly now: () => number;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;
  readonly controlPeriodMs: number;
  private readonly retryMs: number;

  constructor(private readonly opts: PanelOptions) {
    this.now = opts.now ?? (() => performance.now());
    this.setTimer = opts.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    this.controlPeriodMs = opts.controlPeriodMs ?? 10;
    this.retryMs = opts.retryMs ?? 1000;
  }

  start(): void {
    this.stopped = false;
    this.open();
  }

  stop(): void {
    this.stopped = true;
    this.socket?.close();
  }

  private open(): void {
    this.status = "connecting";
    let s: SocketLike;
    try {
      s = this.opts.connect();
    } catch {
      this.onClosed();
      return;
    }
    this.socket = s;
    s.onopen = () => {
      this.status = "connected";
      // the server may have restarted: its clock starts again
      this.lastT = -Infinity;
    };
    s.onmessage = (ev) => this.receive(String(ev.data));
    s.onerror = () => {};
    s.onclose = () => {
      if (this.socket === s) this.onClosed();
    };
  }

  private onClosed(): void {
    this.socket = null;
    this.status = "disconnected";
    if (!this.stopped) this.setTimer(() => this.open(), this.retryMs);
  }

  /// Handles one server frame. Returns true when a state was accepted.
  receive(text: string): boolean {
    let m;
    try {
      m = decodeServerMessage(text);
    } catch (e) {
      if (e instanceof ProtocolError) {
        this.lastError = e.message;
        return false;
      }
      throw e;
    }
    if (m.type === "error") {
      this.lastError = m.message;
      return false;
    }
    if (!(m.t > this.lastT)) {
      ++this.dropped;  // stale or out of order
      return false;
    }
    this.lastT = m.t;
    if (this.sliders === null || this.sliders.length !== m.q_d.length) {
      this.lo = m.limits.lo.slice();
      this.hi = m.limits.hi.slice();
      this.sliders = m.q_d.slice();
    }
    this.controller = m.controller;
    this.latest = m;
    return true;
  }

  private clamp(i: number, v: number): number {
    return Math.min(this.hi[i], Math.max(this.lo[i], v));
  }

  /// Returns the stored (clamped) value.
  setSlider(i: number, value: number): number {
    if (this.sliders === null) throw new Error("sliders not initialised");
    const v = this.clamp(i, value);
    if (v !== this.sliders[i]) {
      this.sliders[i] = v;
      this.dirty = true;
    }
    return v;
  }

  setAll(values: number[]): void {
    if (this.sliders === null) throw new Error("sliders not initialised");
    values.forEach((v, i) => this.setSlider(i, v));
  }

  selectController(c: ControllerName): void {
    this.pendingController = c;
    this.dirty = true;
  }

  requestReset(): void {
    this.pendingReset = true;
    this.dirty = true;
  }

  /// Sends at most one command per control period, and only when something
  /// changed. Call it from a timer; returns whether a command went out.
  flush(): boolean {
    if (!this.dirty || this.sliders === null) return false;
    if (this.status !== "connected" || this.socket === null || this.socket.readyState !== OPEN) return false;
    const now = this.now();
    if (now - this.lastSentMs < this.controlPeriodMs) return false;
    const q_d = this.sliders.slice();
    this.socket.send(encodeCommand(q_d, this.pendingController, this.pendingReset));
    this.lastSentMs = now;
    this.dirty = false;
    this.pendingController = undefined;
    this.pendingReset = false;
    ++this.sent;
    if (this.recordStartMs === null) this.recordStartMs = now;
    this.recording.push({ t: (now - this.recordStartMs) / 1000, q_d });
    return true;
  }

  clearRecording(): void {
    this.recording.length = 0;
    this.recordStartMs = null;
  }

  exportCsv(): string {
    return trajectoryCsv(this.recording);
  }
}

/// Trajectory file: header t,q_0..q_{n-1}, one row per sample, LF endings.
/// Numbers use the shortest text that reads back to the same double.
export function trajectoryCsv(samples: readonly RecordedCommand[]): string {
  if (samples.length === 0) return "";
  const n = samples[0].q_d.length;
  const header = ["t", ...Array.from({ length: n }, (_, i) => `q_${i}`)].join(",");
  const rows = samples.map((s) => [s.t, ...s.q_d].map((x) => String(x)).join(","));
  return [header, ...rows].join("\n") + "\n";
}
