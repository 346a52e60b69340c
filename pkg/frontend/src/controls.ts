// Fixed mappings from panel controls to protocol messages. The gesture
// buttons use the same motion primitives the synthetic generator understands,
// so a human at the dashboard explores exactly the scenario space the offline
// suites sample.

import { ClientMessage, GestureMessage, PoseMessage, RESET, encode, gesture, pose } from "./protocol.js";

export interface ControlSpec {
  id: string;
  label: string;
  message: GestureMessage;
}

export const GESTURE_CONTROLS: ControlSpec[] = [
  { id: "face", label: "Face Sensor", message: gesture("face_sensor", 12, 0) },
  { id: "turn-away", label: "Turn Away", message: gesture("turn_away", 12, 0) },
  { id: "raise-right", label: "Raise Right Hand", message: gesture("raise_right_hand", 15, 40) },
  { id: "raise-left", label: "Raise Left Hand", message: gesture("raise_left_hand", 15, 40) },
  { id: "lower", label: "Lower Hand", message: gesture("lower_hand", 15, 40) },
  { id: "fold", label: "Fold Hands", message: gesture("fold_hands", 20, 0) },
  { id: "hands-on-head", label: "Hands On Head", message: gesture("hands_on_head", 20, 0) },
  { id: "unfold", label: "Unfold", message: gesture("unfold", 20, 0) },
];

export const RESET_CONTROL = { id: "reset", label: "Reset", message: RESET } as const;

// Joints the pose form offers; the engine accepts any joint name it knows,
// these are the ones worth dragging around.
export const POSE_JOINTS = ["RightHand", "LeftHand", "RightElbow", "LeftElbow", "Head"] as const;

// Form validation for the pose panel. Returns the message, or a human-readable
// reason the inputs cannot be sent.
export function poseFromForm(
  joint: string,
  x: number,
  y: number,
  z: number,
  frames: number,
): PoseMessage | string {
  if (![x, y, z].every((v) => Number.isFinite(v))) return "pose target needs three finite coordinates";
  if (!Number.isInteger(frames) || frames < 1) return "frames must be a positive integer";
  return pose(joint, [x, y, z], frames);
}

// Outbound policy: messages sent while the socket is down are queued and
// flushed on (re)connect instead of being lost; the caller surfaces the
// pending count as a banner.
export class Outbox {
  private queue: ClientMessage[] = [];

  constructor(private transmit: (line: string) => boolean) {}

  send(msg: ClientMessage): void {
    if (!this.transmit(encode(msg))) this.queue.push(msg);
  }

  flush(): number {
    let sent = 0;
    while (this.queue.length > 0) {
      const msg = this.queue[0];
      if (!this.transmit(encode(msg))) break;
      this.queue.shift();
      sent += 1;
    }
    return sent;
  }

  get pending(): number {
    return this.queue.length;
  }
}
