// Browser transport: the engine's socket speaks newline-delimited JSON and
// upgrades to a WebSocket when the client opens with an HTTP handshake, which
// is exactly what the browser's WebSocket does. Lines may be split or batched
// across frames, so inbound text runs through a small line buffer.

import { ClientMessage } from "./protocol.js";
import { Outbox } from "./controls.js";
import { Connection } from "./state.js";

export interface SessionHandle {
  send(msg: ClientMessage): void;
  close(): void;
}

export interface SessionCallbacks {
  onLine(line: string): void;
  onStatus(status: Connection, pending: number): void;
}

export function connectSession(url: string, cb: SessionCallbacks): SessionHandle {
  const ws = new WebSocket(url);
  let buffered = "";
  let closed = false;

  const outbox = new Outbox((line) => {
    if (ws.readyState !== WebSocket.OPEN) return false;
    ws.send(line);
    return true;
  });

  cb.onStatus("connecting", 0);

  ws.onopen = () => {
    outbox.flush();
    cb.onStatus("open", outbox.pending);
  };

  ws.onmessage = (ev) => {
    buffered += String(ev.data);
    let nl: number;
    while ((nl = buffered.indexOf("\n")) >= 0) {
      const line = buffered.slice(0, nl);
      buffered = buffered.slice(nl + 1);
      if (line.trim().length > 0) cb.onLine(line);
    }
  };

  ws.onclose = () => {
    if (!closed) cb.onStatus("closed", outbox.pending);
  };

  ws.onerror = () => {
    // onclose follows and reports the status change
  };

  return {
    send(msg: ClientMessage) {
      outbox.send(msg);
      cb.onStatus(ws.readyState === WebSocket.OPEN ? "open" : "connecting", outbox.pending);
    },
    close() {
      closed = true;
      ws.close();
    },
  };
}
