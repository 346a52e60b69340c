// View model of one live session. Every inbound line folds into an immutable
// SessionView snapshot through applyUpdate; the DOM layer only ever renders
// the latest snapshot, so ordering bugs cannot hide in event handlers.

import {
  EngagementCode,
  FACING_BIT,
  INTENT_THRESHOLD,
  ServerError,
  ServerUpdate,
  isServerError,
  parseUpdate,
} from "./protocol.js";

export type Connection = "connecting" | "open" | "closed";

export interface TimelinePoint {
  i: number;
  state: EngagementCode;
  score: number;
  facing: boolean;
  intent: boolean;
  speedR: number;
  speedL: number;
  // Set when a later relabel span rewrote this cell.
  repainted: boolean;
}

export interface RelabelFlash {
  at: number; // frame index of the update that carried the span
  from: number;
  to: number;
}

export interface SessionView {
  connection: Connection;
  state: EngagementCode | null;
  score: number;
  bits: string;
  timeline: TimelinePoint[];
  flashes: RelabelFlash[];
  // Lines ignored because they were malformed or out of order.
  dropped: number;
  lastError: string | null;
}

// Rolling window: two minutes at the default 30 fps.
export const MAX_TIMELINE = 3600;

export function initialView(): SessionView {
  return {
    connection: "connecting",
    state: null,
    score: 0,
    bits: "",
    timeline: [],
    flashes: [],
    dropped: 0,
    lastError: null,
  };
}

export function setConnection(view: SessionView, connection: Connection): SessionView {
  return { ...view, connection };
}

function toPoint(u: ServerUpdate): TimelinePoint {
  return {
    i: u.i,
    state: u.state,
    score: u.score,
    facing: u.g[FACING_BIT] === "1",
    intent: u.score >= INTENT_THRESHOLD,
    speedR: u.speed_r,
    speedL: u.speed_l,
    repainted: false,
  };
}

export function applyUpdate(view: SessionView, msg: ServerUpdate | ServerError): SessionView {
  if (isServerError(msg)) {
    return { ...view, lastError: msg.error };
  }

  // Timeline indices must stay strictly increasing; a stale or duplicated
  // index is dropped rather than spliced in.
  const last = view.timeline[view.timeline.length - 1];
  if (last !== undefined && msg.i <= last.i) {
    return { ...view, dropped: view.dropped + 1 };
  }

  let timeline = [...view.timeline, toPoint(msg)];
  let flashes = view.flashes;

  if (msg.relabel !== null) {
    const [from, to] = msg.relabel;
    timeline = timeline.map((p) =>
      p.i >= from && p.i <= to ? { ...p, state: msg.state, repainted: true } : p,
    );
    flashes = [...flashes, { at: msg.i, from, to }].slice(-50);
  }

  if (timeline.length > MAX_TIMELINE) {
    timeline = timeline.slice(timeline.length - MAX_TIMELINE);
  }

  return {
    ...view,
    state: msg.state,
    score: msg.score,
    bits: msg.g,
    timeline,
    flashes,
  };
}

// Convenience for transports that hand over raw lines.
export function applyLine(view: SessionView, line: string): SessionView {
  const msg = parseUpdate(line);
  if (msg === null) {
    return { ...view, dropped: view.dropped + 1 };
  }
  return applyUpdate(view, msg);
}
