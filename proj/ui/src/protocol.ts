// Wire messages exchanged with the teleop server on /teleop.

export const SCHEMA_VERSION = 1;

export type ControllerName = "adaptive" | "fixed" | "position";
export const CONTROLLERS: readonly ControllerName[] = ["adaptive", "fixed", "position"];

export type Vec3 = [number, number, number];

export interface FingertipSample {
  name: string;
  position: Vec3;
}

export interface ContactSample {
  fingertip: string;
  object: string;
  point: Vec3;
  normal: Vec3;
  force: number;
}

export interface StateMessage {
  type: "state";
  version: number;
  t: number;
  controller: ControllerName;
  q: number[];
  q_d: number[];
  fingertips: FingertipSample[];
  contacts: ContactSample[];
  profiles: { ks: number[]; kd: number[]; v: number[] };
  aggregates: { ticks: number; max_force: number; mean_force: number; contact_samples: number };
  limits: { lo: number[]; hi: number[] };
}

export interface CommandMessage {
  type: "command";
  version: number;
  q_d: number[];
  controller?: ControllerName;
  reset?: boolean;
}

export interface ErrorMessage {
  type: "error";
  version: number;
  message: string;
}

export class ProtocolError extends Error {}

function isNumberArray(x: unknown): x is number[] {
  return Array.isArray(x) && x.every((v) => typeof v === "number" && Number.isFinite(v));
}

function isVec3(x: unknown): x is Vec3 {
  return isNumberArray(x) && x.length === 3;
}

function need(cond: boolean, what: string): void {
  if (!cond) throw new ProtocolError(what);
}

/// Parses one server frame. Throws ProtocolError on anything malformed.
export function decodeServerMessage(text: string): StateMessage | ErrorMessage {
  let m: any;
  try {
    m = JSON.parse(text);
  } catch {
    throw new ProtocolError("not JSON");
  }
  need(typeof m === "object" && m !== null, "message must be an object");
  need(m.version === SCHEMA_VERSION, `unsupported schema version ${JSON.stringify(m.version)}`);
  if (m.type === "error") {
    need(typeof m.message === "string", "error without message");
    return m as ErrorMessage;
  }
  need(m.type === "state", `unexpected message type ${JSON.stringify(m.type)}`);
  need(typeof m.t === "number", "t");
  need(CONTROLLERS.includes(m.controller), "controller");
  need(isNumberArray(m.q) && isNumberArray(m.q_d) && m.q.length === m.q_d.length, "q / q_d");
  const n = m.q.length;
  need(Array.isArray(m.fingertips) && m.fingertips.every((f: any) => typeof f.name === "string" && isVec3(f.position)),
    "fingertips");
  need(Array.isArray(m.contacts) &&
    m.contacts.every((c: any) => typeof c.fingertip === "string" && isVec3(c.point) && typeof c.force === "number"),
    "contacts");
  need(typeof m.profiles === "object" && m.profiles !== null, "profiles");
  for (const k of ["ks", "kd", "v"]) need(isNumberArray(m.profiles[k]) && m.profiles[k].length === n, `profiles.${k}`);
  need(typeof m.aggregates === "object" && m.aggregates !== null, "aggregates");
  need(typeof m.limits === "object" && m.limits !== null, "limits");
  need(isNumberArray(m.limits.lo) && isNumberArray(m.limits.hi) && m.limits.lo.length === n && m.limits.hi.length === n,
    "limits");
  return m as StateMessage;
}

export function encodeCommand(q_d: number[], controller?: ControllerName, reset = false): string {
  const m: CommandMessage = { type: "command", version: SCHEMA_VERSION, q_d };
  if (controller !== undefined) m.controller = controller;
  if (reset) m.reset = true;
  return JSON.stringify(m);
}
