import { describe, expect, it } from "vitest";

import {
  RESET,
  ServerUpdate,
  encode,
  gesture,
  isServerError,
  parseUpdate,
  pose,
} from "../src/protocol.js";

const VALID_G = "0".repeat(28) + "1" + "0".repeat(8);

function validLine(over: Partial<Record<keyof ServerUpdate, unknown>> = {}): string {
  return JSON.stringify({
    i: 42,
    state: "A",
    score: 0.25,
    g: VALID_G,
    speed_r: 0,
    speed_l: 12.5,
    relabel: null,
    ...over,
  });
}

describe("outbound messages", () => {
  it("encodes the raise gesture exactly as the engine expects", () => {
    expect(encode(gesture("raise_right_hand", 15, 40))).toBe(
      '{"type":"gesture","name":"raise_right_hand","frames":15,"speed":40}\n',
    );
  });

  it("encodes reset as the bare type object", () => {
    expect(encode(RESET)).toBe('{"type":"reset"}\n');
  });

  it("builds pose messages with a three-coordinate target", () => {
    expect(pose("RightHand", [400, 600, 2400], 20)).toEqual({
      type: "pose",
      joint: "RightHand",
      target: [400, 600, 2400],
      frames: 20,
    });
  });
});

describe("parseUpdate", () => {
  it("accepts a well-formed frame update", () => {
    const u = parseUpdate(validLine());
    expect(u).not.toBeNull();
    expect(isServerError(u!)).toBe(false);
    const upd = u as ServerUpdate;
    expect(upd.i).toBe(42);
    expect(upd.state).toBe("A");
    expect(upd.g).toBe(VALID_G);
    expect(upd.relabel).toBeNull();
  });

  it("accepts a relabel span and keeps it ordered", () => {
    const u = parseUpdate(validLine({ relabel: [100, 110] })) as ServerUpdate;
    expect(u.relabel).toEqual([100, 110]);
  });

  it("passes server error reports through", () => {
    const u = parseUpdate('{"error":"unknown gesture"}');
    expect(u).not.toBeNull();
    expect(isServerError(u!)).toBe(true);
  });

  it.each([
    ["not json", "{nope"],
    ["a bare array", "[1,2,3]"],
    ["a non-integer index", validLine({ i: 1.5 })],
    ["a negative index", validLine({ i: -1 })],
    ["an unknown state code", validLine({ state: "Q" })],
    ["a score above one", validLine({ score: 1.5 })],
    ["a non-finite score", validLine({ score: "NaN" })],
    ["a short bit vector", validLine({ g: "01" })],
    ["letters in the bit vector", validLine({ g: "x".repeat(37) })],
    ["a negative speed", validLine({ speed_r: -2 })],
    ["a reversed relabel span", validLine({ relabel: [110, 100] })],
    ["a one-element relabel span", validLine({ relabel: [5] })],
    ["a missing field", '{"i":1,"state":"D"}'],
  ])("rejects %s", (_label, line) => {
    expect(parseUpdate(line)).toBeNull();
  });
});
