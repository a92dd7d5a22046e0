/**
 * Payload envelopes.
 *
 * Every value crossing the REST boundary travels as a base64-encoded
 * envelope: 1 byte codec id, 2-byte big-endian routing-tag length, the
 * routing tag, then the codec payload.
 *
 * The client always *encodes* with the text codec (id 2, UTF-8 JSON) —
 * simple, debuggable, and sufficient for JSON-shaped inputs.  It can
 * *decode* both built-in codecs, because results produced server-side
 * normally arrive under the binary codec (id 1).
 */

export const TEXT_CODEC = 2;
export const BINARY_CODEC = 1;

export class EnvelopeError extends Error {}

export interface Envelope {
  codecId: number;
  routingTag: Uint8Array;
  payload: Uint8Array;
}

export function envelopeToBytes(env: Envelope): Uint8Array {
  if (env.routingTag.length > 0xffff) {
    throw new EnvelopeError("routing tag exceeds 2-byte length field");
  }
  const out = new Uint8Array(3 + env.routingTag.length + env.payload.length);
  out[0] = env.codecId;
  out[1] = env.routingTag.length >> 8;
  out[2] = env.routingTag.length & 0xff;
  out.set(env.routingTag, 3);
  out.set(env.payload, 3 + env.routingTag.length);
  return out;
}

export function envelopeFromBytes(raw: Uint8Array): Envelope {
  if (raw.length < 3) throw new EnvelopeError("envelope header truncated");
  const codecId = raw[0]!;
  const tagLen = (raw[1]! << 8) | raw[2]!;
  if (raw.length < 3 + tagLen) throw new EnvelopeError("routing tag truncated");
  return {
    codecId,
    routingTag: raw.subarray(3, 3 + tagLen),
    payload: raw.subarray(3 + tagLen),
  };
}

/** Wrap a JSON-shaped value into a base64 text-codec envelope. */
export function encodePayload(value: unknown): string {
  const payload = new TextEncoder().encode(JSON.stringify(value === undefined ? null : value));
  const bytes = envelopeToBytes({ codecId: TEXT_CODEC, routingTag: new Uint8Array(0), payload });
  return Buffer.from(bytes).toString("base64");
}

/** Unwrap a base64 envelope produced by the service. */
export function decodePayload(b64: string): unknown {
  const env = envelopeFromBytes(new Uint8Array(Buffer.from(b64, "base64")));
  if (env.codecId === TEXT_CODEC) {
    return JSON.parse(new TextDecoder().decode(env.payload));
  }
  if (env.codecId === BINARY_CODEC) {
    return decodeBinary(env.payload);
  }
  throw new EnvelopeError(`unknown codec id ${env.codecId}`);
}

// binary codec type tags
const T_NONE = 0;
const T_TRUE = 1;
const T_FALSE = 2;
const T_INT = 3;
const T_FLOAT = 4;
const T_BYTES = 5;
const T_STR = 6;
const T_LIST = 7;
const T_DICT = 8;

function decodeBinary(payload: Uint8Array): unknown {
  const view = new DataView(payload.buffer, payload.byteOffset, payload.byteLength);
  const [value, offset] = dec(payload, view, 0);
  if (offset !== payload.length) throw new EnvelopeError("trailing bytes after value");
  return value;
}

function dec(buf: Uint8Array, view: DataView, off: number): [unknown, number] {
  if (off >= buf.length) throw new EnvelopeError("unexpected end of payload");
  const tag = buf[off]!;
  off += 1;
  switch (tag) {
    case T_NONE:
      return [null, off];
    case T_TRUE:
      return [true, off];
    case T_FALSE:
      return [false, off];
    case T_INT: {
      const big = view.getBigInt64(off);
      const v =
        big >= BigInt(Number.MIN_SAFE_INTEGER) && big <= BigInt(Number.MAX_SAFE_INTEGER)
          ? Number(big)
          : big;
      return [v, off + 8];
    }
    case T_FLOAT:
      return [view.getFloat64(off), off + 8];
    case T_BYTES:
    case T_STR: {
      const n = view.getUint32(off);
      off += 4;
      if (off + n > buf.length) throw new EnvelopeError("length field exceeds payload");
      const raw = buf.subarray(off, off + n);
      off += n;
      return [tag === T_STR ? new TextDecoder().decode(raw) : new Uint8Array(raw), off];
    }
    case T_LIST: {
      const n = view.getUint32(off);
      off += 4;
      const items: unknown[] = [];
      for (let i = 0; i < n; i++) {
        const [item, next] = dec(buf, view, off);
        items.push(item);
        off = next;
      }
      return [items, off];
    }
    case T_DICT: {
      const n = view.getUint32(off);
      off += 4;
      const obj: Record<string, unknown> = {};
      for (let i = 0; i < n; i++) {
        const klen = view.getUint32(off);
        off += 4;
        if (off + klen > buf.length) throw new EnvelopeError("key length exceeds payload");
        const key = new TextDecoder().decode(buf.subarray(off, off + klen));
        off += klen;
        const [item, next] = dec(buf, view, off);
        obj[key] = item;
        off = next;
      }
      return [obj, off];
    }
    default:
      throw new EnvelopeError(`unknown type tag ${tag}`);
  }
}
