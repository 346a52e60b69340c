// Wire protocol of the engagement engine's serve socket: UTF-8 JSON, one
// message per line, in both directions. This module owns the message shapes
// and the validation of inbound lines; it has no opinion about transport.

export type EngagementCode = "D" | "A" | "I" | "X";

export const STATE_NAMES: Record<EngagementCode, string> = {
  D: "Disengagement",
  A: "Attention",
  I: "Intention",
  X: "Action",
};

export interface GestureMessage {
  type: "gesture";
  name: string;
  frames: number;
  speed: number;
}

export interface PoseMessage {
  type: "pose";
  joint: string;
  target: [number, number, number];
  frames: number;
}

export interface ResetMessage {
  type: "reset";
}

export type ClientMessage = GestureMessage | PoseMessage | ResetMessage;

// One server line per synthesized frame. `g` is the 37-bit classifier vector
// as a bitstring, index 0 leftmost. `relabel` reports a retroactive rewrite
// of already-displayed frames as an inclusive index span.
export interface ServerUpdate {
  i: number;
  state: EngagementCode;
  score: number;
  g: string;
  speed_r: number;
  speed_l: number;
  relabel: [number, number] | null;
}

export interface ServerError {
  error: string;
}

export const BIT_COUNT = 37;

// Bit 28 of `g` is the facing-the-sensor classifier; the engine cannot leave
// Disengagement while it is 0.
export const FACING_BIT = 28;

// Display boundary for the intent strip. The engine thresholds its logistic
// score at the model's own cut (0.5 unless retrained otherwise); the strip
// uses the default.
export const INTENT_THRESHOLD = 0.5;

export function gesture(name: string, frames: number, speed: number): GestureMessage {
  return { type: "gesture", name, frames, speed };
}

export function pose(joint: string, target: [number, number, number], frames: number): PoseMessage {
  return { type: "pose", joint, target, frames };
}

export const RESET: ResetMessage = { type: "reset" };

export function encode(msg: ClientMessage): string {
  return JSON.stringify(msg) + "\n";
}

function isCode(v: unknown): v is EngagementCode {
  return v === "D" || v === "A" || v === "I" || v === "X";
}

function isIndex(v: unknown): v is number {
  return typeof v === "number" && Number.isInteger(v) && v >= 0;
}

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

// Strict read of one inbound line. Returns the update, the server's error
// report, or null when the line is not something the protocol defines; the
// caller drops null lines without touching the view.
export function parseUpdate(line: string): ServerUpdate | ServerError | null {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) return null;
  const msg = raw as Record<string, unknown>;

  if (typeof msg.error === "string") return { error: msg.error };

  if (!isIndex(msg.i)) return null;
  if (!isCode(msg.state)) return null;
  if (!isFiniteNumber(msg.score) || msg.score < 0 || msg.score > 1) return null;
  if (typeof msg.g !== "string" || !new RegExp(`^[01]{${BIT_COUNT}}$`).test(msg.g)) return null;
  if (!isFiniteNumber(msg.speed_r) || msg.speed_r < 0) return null;
  if (!isFiniteNumber(msg.speed_l) || msg.speed_l < 0) return null;

  let relabel: [number, number] | null = null;
  if (msg.relabel !== null && msg.relabel !== undefined) {
    const span = msg.relabel;
    if (!Array.isArray(span) || span.length !== 2) return null;
    const [from, to] = span;
    if (!isIndex(from) || !isIndex(to) || from > to) return null;
    relabel = [from, to];
  }

  return {
    i: msg.i,
    state: msg.state,
    score: msg.score,
    g: msg.g,
    speed_r: msg.speed_r,
    speed_l: msg.speed_l,
    relabel,
  };
}

export function isServerError(msg: ServerUpdate | ServerError): msg is ServerError {
  return "error" in msg;
}
