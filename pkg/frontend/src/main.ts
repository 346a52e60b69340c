// Dashboard wiring: connects to a running engine session, folds every server
// line into the view model, and redraws the panels. All interesting logic
// lives in protocol/state/timeline/controls; this file only touches the DOM.

import { STATE_NAMES, EngagementCode } from "./protocol.js";
import { SessionView, applyLine, initialView, setConnection } from "./state.js";
import { buildStrips, timelineSummary } from "./timeline.js";
import { GESTURE_CONTROLS, POSE_JOINTS, RESET_CONTROL, poseFromForm } from "./controls.js";
import { SessionHandle, connectSession } from "./client.js";

const STATE_COLORS: Record<EngagementCode, string> = {
  D: "#7a7a7a",
  A: "#3b82f6",
  I: "#eab308",
  X: "#ef4444",
};

const BIT_GROUPS = [
  { label: "right hand", from: 0, to: 13 },
  { label: "left hand", from: 14, to: 27 },
  { label: "facing", from: 28, to: 28 },
  { label: "lean", from: 29, to: 31 },
  { label: "special", from: 32, to: 36 },
];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

let view: SessionView = initialView();
let session: SessionHandle | null = null;

function redraw(): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent =
    view.connection === "open"
      ? "connected"
      : view.connection === "connecting"
        ? "connecting..."
        : "disconnected; controls are queued";
  banner.className = `banner ${view.connection}`;

  const badge = el<HTMLDivElement>("state-badge");
  if (view.state !== null) {
    badge.textContent = `${view.state} ${STATE_NAMES[view.state]}`;
    badge.style.background = STATE_COLORS[view.state];
  }

  el<HTMLSpanElement>("score").textContent = view.score.toFixed(3);
  el<HTMLDivElement>("score-fill").style.width = `${Math.round(view.score * 100)}%`;

  const bitsBox = el<HTMLDivElement>("bits");
  if (view.bits.length > 0) {
    bitsBox.replaceChildren(
      ...BIT_GROUPS.map((g) => {
        const group = document.createElement("span");
        group.className = "bit-group";
        group.title = g.label;
        for (let i = g.from; i <= g.to; i += 1) {
          const cell = document.createElement("span");
          cell.className = view.bits[i] === "1" ? "bit on" : "bit";
          cell.textContent = view.bits[i];
          group.appendChild(cell);
        }
        return group;
      }),
    );
  }

  if (view.lastError !== null) {
    el<HTMLDivElement>("last-error").textContent = `server: ${view.lastError}`;
  }

  const flashBox = el<HTMLUListElement>("flashes");
  flashBox.replaceChildren(
    ...view.flashes
      .slice(-8)
      .reverse()
      .map((fl) => {
        const li = document.createElement("li");
        li.textContent = `frame ${fl.at}: repainted ${fl.from}-${fl.to}`;
        return li;
      }),
  );

  drawTimeline();
  el<HTMLCanvasElement>("timeline").setAttribute("aria-label", timelineSummary(view));
}

function drawTimeline(): void {
  const canvas = el<HTMLCanvasElement>("timeline");
  const ctx = canvas.getContext("2d");
  if (ctx === null) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);

  if (view.timeline.length === 0) {
    ctx.fillStyle = "#888";
    ctx.font = "14px sans-serif";
    ctx.fillText("waiting for frames", 12, height / 2);
    return;
  }

  const strips = buildStrips(view);
  const first = view.timeline[0].i;
  const lastP = view.timeline[view.timeline.length - 1];
  const span = Math.max(lastP.i - first, 1);
  const xOf = (i: number) => ((i - first) / span) * (width - 1);
  const rowH = height / 4;

  // facing bit
  for (const run of strips.facing) {
    ctx.fillStyle = run.value ? "#22c55e" : "#333";
    ctx.fillRect(xOf(run.from), 2, xOf(run.to) - xOf(run.from) + 1, rowH - 4);
  }

  // hand speed, right solid and left dim, normalized to the window maximum
  const vmax = Math.max(1, ...strips.speed.map((s) => Math.max(s.r, s.l)));
  ctx.strokeStyle = "#60a5fa";
  ctx.beginPath();
  strips.speed.forEach((s, k) => {
    const x = xOf(s.i);
    const y = rowH + (rowH - 4) * (1 - s.r / vmax) + 2;
    k === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  });
  ctx.stroke();
  ctx.strokeStyle = "#475569";
  ctx.beginPath();
  strips.speed.forEach((s, k) => {
    const x = xOf(s.i);
    const y = rowH + (rowH - 4) * (1 - s.l / vmax) + 2;
    k === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  });
  ctx.stroke();

  // intent bit
  for (const run of strips.intent) {
    ctx.fillStyle = run.value ? "#a855f7" : "#333";
    ctx.fillRect(xOf(run.from), 2 * rowH + 2, xOf(run.to) - xOf(run.from) + 1, rowH - 4);
  }

  // engagement band; repainted spans get a bright outline
  for (const band of strips.states) {
    const x0 = xOf(band.from);
    const w = xOf(band.to) - x0 + 1;
    ctx.fillStyle = STATE_COLORS[band.state];
    ctx.fillRect(x0, 3 * rowH + 2, w, rowH - 4);
    if (band.repainted) {
      ctx.strokeStyle = "#fff";
      ctx.strokeRect(x0 + 0.5, 3 * rowH + 2.5, Math.max(w - 1, 1), rowH - 5);
    }
  }
}

function fold(line: string): void {
  view = applyLine(view, line);
  redraw();
}

function connect(): void {
  session?.close();
  view = initialView();
  const host = el<HTMLInputElement>("host").value || "127.0.0.1";
  const port = el<HTMLInputElement>("port").value || "7641";
  session = connectSession(`ws://${host}:${port}/`, {
    onLine: fold,
    onStatus: (status, pending) => {
      view = setConnection(view, status);
      el<HTMLSpanElement>("pending").textContent = pending > 0 ? `${pending} queued` : "";
      redraw();
    },
  });
}

function buildControls(): void {
  const bar = el<HTMLDivElement>("gestures");
  for (const spec of GESTURE_CONTROLS) {
    const btn = document.createElement("button");
    btn.id = `ctl-${spec.id}`;
    btn.textContent = spec.label;
    btn.onclick = () => session?.send(spec.message);
    bar.appendChild(btn);
  }
  const reset = document.createElement("button");
  reset.id = `ctl-${RESET_CONTROL.id}`;
  reset.textContent = RESET_CONTROL.label;
  reset.className = "danger";
  reset.onclick = () => session?.send(RESET_CONTROL.message);
  bar.appendChild(reset);

  const jointSel = el<HTMLSelectElement>("pose-joint");
  for (const j of POSE_JOINTS) {
    const opt = document.createElement("option");
    opt.value = j;
    opt.textContent = j;
    jointSel.appendChild(opt);
  }

  el<HTMLButtonElement>("pose-send").onclick = () => {
    const msg = poseFromForm(
      jointSel.value,
      Number(el<HTMLInputElement>("pose-x").value),
      Number(el<HTMLInputElement>("pose-y").value),
      Number(el<HTMLInputElement>("pose-z").value),
      Number(el<HTMLInputElement>("pose-frames").value),
    );
    if (typeof msg === "string") {
      el<HTMLDivElement>("last-error").textContent = msg;
    } else {
      session?.send(msg);
    }
  };

  el<HTMLButtonElement>("connect").onclick = connect;
}

buildControls();
connect();
