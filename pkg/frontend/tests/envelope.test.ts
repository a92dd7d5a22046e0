import { describe, expect, it } from "vitest";

import {
  BINARY_CODEC,
  TEXT_CODEC,
  decodePayload,
  encodePayload,
  envelopeFromBytes,
} from "../src/envelope.js";

describe("text-codec encoding", () => {
  it("wraps values in a text envelope with an empty routing tag", () => {
    const b64 = encodePayload({ a: 1 });
    const env = envelopeFromBytes(new Uint8Array(Buffer.from(b64, "base64")));
    expect(env.codecId).toBe(TEXT_CODEC);
    expect(env.routingTag.length).toBe(0);
    expect(JSON.parse(new TextDecoder().decode(env.payload))).toEqual({ a: 1 });
  });

  it("round-trips JSON-shaped values", () => {
    for (const v of [null, true, -42, 3.5, "héllo", [1, "two", null], { a: { b: [1, 2] } }]) {
      expect(decodePayload(encodePayload(v))).toEqual(v);
    }
  });

  it("encodes undefined as null", () => {
    expect(decodePayload(encodePayload(undefined))).toBeNull();
  });
});

describe("binary-codec decoding", () => {
  // fixtures produced by the service-side binary codec
  const fixtures: [string, unknown][] = [
    ["AQAAAA==", null],
    ["AQAAAQ==", true],
    ["AQAAA//////////W", -42],
    ["AQAABEAMAAAAAAAA", 3.5],
    ["AQAABgAAAAZow6lsbG8=", "héllo"],
    ["AQAABwAAAAMDAAAAAAAAAAEGAAAAA3R3bwA=", [1, "two", null]],
    [
      "AQAACAAAAAIAAAABYQMAAAAAAAAAAQAAAAZuZXN0ZWQIAAAAAQAAAAFiBwAAAAIEQAQAAAAAAAAC",
      { a: 1, nested: { b: [2.5, false] } },
    ],
  ];

  it("decodes every fixture to the original value", () => {
    for (const [b64, expected] of fixtures) {
      const env = envelopeFromBytes(new Uint8Array(Buffer.from(b64, "base64")));
      expect(env.codecId).toBe(BINARY_CODEC);
      expect(decodePayload(b64)).toEqual(expected);
    }
  });

  it("decodes binary bytes values to Uint8Array", () => {
    expect(decodePayload("AQAABQAAAAMAAf8=")).toEqual(new Uint8Array([0, 1, 255]));
  });

  it("rejects truncated envelopes", () => {
    expect(() => decodePayload("AQ==")).toThrow();
  });

  it("rejects unknown codec ids", () => {
    expect(() => decodePayload(Buffer.from([9, 0, 0, 1]).toString("base64"))).toThrow(
      /unknown codec/,
    );
  });
});
