import { describe, expect, it } from "vitest";

import { FrameDecoder, WireMessage, decodeMessage, encodeFrame, encodeMessage } from "../src/protocol.js";

const sample: WireMessage = {
  type: "StateUpdate",
  seq: 12,
  payload: { session: { phase: "Idle", captured_targets: [] } },
  reply_to: 4,
};

describe("json codec", () => {
  it("round-trips a message", () => {
    expect(decodeMessage(encodeMessage(sample))).toEqual(sample);
  });

  it("defaults payload to an empty object", () => {
    const msg = decodeMessage(JSON.stringify({ type: "Hello", seq: 1 }));
    expect(msg.payload).toEqual({});
    expect(msg.reply_to).toBeUndefined();
  });

  it("rejects messages without a type", () => {
    expect(() => decodeMessage(JSON.stringify({ seq: 1 }))).toThrow();
  });
});

describe("length-prefixed framing", () => {
  it("decodes messages split across arbitrary chunk boundaries", () => {
    const messages: WireMessage[] = [
      { type: "Hello", seq: 1, payload: { role: "viewer" } },
      { type: "ForceReading", seq: 2, payload: { newtons: 9.81 } },
      sample,
    ];
    const blob = new Uint8Array(
      messages.map(encodeFrame).reduce<number[]>((acc, b) => acc.concat([...b]), []),
    );
    for (const chunkSize of [1, 3, 7, 1000]) {
      const decoder = new FrameDecoder();
      const out: WireMessage[] = [];
      for (let i = 0; i < blob.length; i += chunkSize) {
        out.push(...decoder.feed(blob.slice(i, i + chunkSize)));
      }
      expect(out).toEqual(messages);
    }
  });
});
