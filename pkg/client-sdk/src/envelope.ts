/**
 * Bridge wire grammar: 4-byte big-endian length prefix + UTF-8 JSON object
 * with keys op, topic, seq, stamp, msg.  The encoder is canonical (fixed key
 * order, no whitespace) and byte-compatible with the simulator's encoder.
 */

export const MAX_FRAME = 16 * 1024 * 1024;
export const MAX_TOPIC_BYTES = 256;
export const OPS = ["advertise", "subscribe", "publish", "status"] as const;
export type Op = (typeof OPS)[number];

export type JsonValue =
  | null
  | boolean
  | number
  | string
  | JsonValue[]
  | { [key: string]: JsonValue };

export interface Envelope {
  op: Op;
  topic: string;
  seq: number;
  stamp: number;
  msg: JsonValue;
}

export class ProtocolError extends Error {}
export class OversizeFrame extends ProtocolError {}
export class MalformedJson extends ProtocolError {}
export class UnknownOp extends ProtocolError {}

export function validateEnvelope(e: Envelope): Envelope {
  if (!OPS.includes(e.op)) {
    throw new UnknownOp(`unknown op ${JSON.stringify(e.op)}`);
  }
  if (typeof e.topic !== "string" || e.topic.length === 0) {
    throw new MalformedJson("topic must be a non-empty string");
  }
  if (Buffer.byteLength(e.topic, "utf8") > MAX_TOPIC_BYTES) {
    throw new MalformedJson("topic exceeds 256 bytes");
  }
  if (typeof e.seq !== "number" || !Number.isInteger(e.seq) || e.seq < 0) {
    throw new MalformedJson("seq must be a non-negative integer");
  }
  if (typeof e.stamp !== "number" || !Number.isFinite(e.stamp)) {
    throw new MalformedJson("stamp must be a number");
  }
  return e;
}

export function encodeFrame(e: Envelope): Buffer {
  validateEnvelope(e);
  const body = Buffer.from(
    JSON.stringify({
      op: e.op,
      topic: e.topic,
      seq: e.seq,
      stamp: e.stamp,
      msg: e.msg === undefined ? null : e.msg,
    }),
    "utf8",
  );
  if (body.length > MAX_FRAME) {
    throw new OversizeFrame(`frame body ${body.length} exceeds ${MAX_FRAME}`);
  }
  const frame = Buffer.alloc(4 + body.length);
  frame.writeUInt32BE(body.length, 0);
  body.copy(frame, 4);
  return frame;
}

export function decodeBody(body: Buffer): Envelope {
  let obj: unknown;
  try {
    obj = JSON.parse(body.toString("utf8"));
  } catch (err) {
    throw new MalformedJson(String(err));
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new MalformedJson("frame body is not a JSON object");
  }
  const rec = obj as Record<string, unknown>;
  for (const key of ["op", "topic", "seq", "stamp", "msg"]) {
    if (!(key in rec)) {
      throw new MalformedJson(`missing key '${key}'`);
    }
  }
  if (typeof rec.op !== "string") {
    throw new MalformedJson("op must be a string");
  }
  return validateEnvelope({
    op: rec.op as Op,
    topic: rec.topic as string,
    seq: rec.seq as number,
    stamp: rec.stamp as number,
    msg: rec.msg as JsonValue,
  });
}

export function decodeFrame(data: Buffer): Envelope {
  if (data.length < 4) {
    throw new MalformedJson("frame shorter than the length prefix");
  }
  const n = data.readUInt32BE(0);
  if (n > MAX_FRAME) {
    throw new OversizeFrame(`declared length ${n} exceeds ${MAX_FRAME}`);
  }
  if (data.length !== 4 + n) {
    throw new MalformedJson(`frame length ${data.length - 4} != declared ${n}`);
  }
  return decodeBody(data.subarray(4));
}

/** Incremental stream splitter: feed socket chunks, get complete envelopes. */
export class FrameSplitter {
  #buf: Buffer = Buffer.alloc(0);

  /** Returns decoded envelopes; throws ProtocolError on a poisoned stream. */
  push(chunk: Buffer): Envelope[] {
    this.#buf = this.#buf.length ? Buffer.concat([this.#buf, chunk]) : chunk;
    const out: Envelope[] = [];
    while (this.#buf.length >= 4) {
      const n = this.#buf.readUInt32BE(0);
      if (n > MAX_FRAME) {
        throw new OversizeFrame(`declared length ${n} exceeds ${MAX_FRAME}`);
      }
      if (this.#buf.length < 4 + n) {
        break;
      }
      const body = this.#buf.subarray(4, 4 + n);
      this.#buf = this.#buf.subarray(4 + n);
      out.push(decodeBody(body));
    }
    return out;
  }
}
