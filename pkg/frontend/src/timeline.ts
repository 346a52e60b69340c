// Render model for the timeline chart: four stacked strips (facing bit, hand
// speed, intent bit, engagement band) computed as plain data so the drawing
// code stays a dumb loop and the interesting logic is unit-testable.

import { EngagementCode } from "./protocol.js";
import { SessionView, TimelinePoint } from "./state.js";

export interface Band {
  state: EngagementCode;
  from: number;
  to: number; // inclusive
  repainted: boolean;
}

export interface BoolRun {
  value: boolean;
  from: number;
  to: number; // inclusive
}

export interface Strips {
  facing: BoolRun[];
  speed: { i: number; r: number; l: number }[];
  intent: BoolRun[];
  states: Band[];
}

// Run-length merge of the engagement band. Adjacent cells join when both the
// state and the repaint flag match, so a retroactive rewrite stays visible as
// its own highlighted segment.
export function stateBands(timeline: TimelinePoint[]): Band[] {
  const bands: Band[] = [];
  for (const p of timeline) {
    const tail = bands[bands.length - 1];
    if (tail !== undefined && tail.state === p.state && tail.repainted === p.repainted && tail.to === p.i - 1) {
      tail.to = p.i;
    } else {
      bands.push({ state: p.state, from: p.i, to: p.i, repainted: p.repainted });
    }
  }
  return bands;
}

function boolRuns(timeline: TimelinePoint[], pick: (p: TimelinePoint) => boolean): BoolRun[] {
  const runs: BoolRun[] = [];
  for (const p of timeline) {
    const v = pick(p);
    const tail = runs[runs.length - 1];
    if (tail !== undefined && tail.value === v && tail.to === p.i - 1) {
      tail.to = p.i;
    } else {
      runs.push({ value: v, from: p.i, to: p.i });
    }
  }
  return runs;
}

export function buildStrips(view: SessionView): Strips {
  return {
    facing: boolRuns(view.timeline, (p) => p.facing),
    speed: view.timeline.map((p) => ({ i: p.i, r: p.speedR, l: p.speedL })),
    intent: boolRuns(view.timeline, (p) => p.intent),
    states: stateBands(view.timeline),
  };
}

// The order in which distinct states appear, consecutive duplicates merged.
// A scripted raise-hand run shows up here as D, A, I, X.
export function visitOrder(timeline: TimelinePoint[]): EngagementCode[] {
  const order: EngagementCode[] = [];
  for (const p of timeline) {
    if (order[order.length - 1] !== p.state) order.push(p.state);
  }
  return order;
}

// Textual rendering of the band strip, also used as the chart's accessible
// label: "0000-0007 D | 0008-0226 A | ...".
export function timelineSummary(view: SessionView): string {
  const bands = stateBands(view.timeline);
  if (bands.length === 0) return "no frames yet";
  return bands
    .map((b) => {
      const span = `${String(b.from).padStart(4, "0")}-${String(b.to).padStart(4, "0")} ${b.state}`;
      return b.repainted ? `${span}*` : span;
    })
    .join(" | ");
}
