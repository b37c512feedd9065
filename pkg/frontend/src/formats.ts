/**
 * Codecs for the ordseg file formats.
 *
 * OPM1: 4-byte magic "OPM1", one kind byte (0 = probabilities, 1 = logits),
 * three little-endian uint32 (K, H, W), then K*H*W little-endian float64
 * values in channel-major, row-major order.
 *
 * PGM: binary P5 with maxval 255; gray values are class indices.
 */

export const KIND_PROBS = 0;
export const KIND_LOGITS = 1;

const OPM1_MAGIC = "OPM1";
const OPM1_HEADER_BYTES = 17;

/** A dense K x H x W float64 map backed by a contiguous typed array. */
export interface DenseMap {
  readonly k: number;
  readonly h: number;
  readonly w: number;
  readonly data: Float64Array;
}

/** An H x W label mask backed by a contiguous byte array. */
export interface LabelMask {
  readonly h: number;
  readonly w: number;
  readonly labels: Uint8Array;
}

export class FormatError extends Error {}

function checkDims(name: string, value: number): void {
  if (!Number.isInteger(value) || value < 1) {
    throw new FormatError(`${name} must be a positive integer, got ${value}`);
  }
}

export function checkDenseMap(map: DenseMap): void {
  checkDims("k", map.k);
  checkDims("h", map.h);
  checkDims("w", map.w);
  if (!(map.data instanceof Float64Array)) {
    throw new FormatError("map data must be a Float64Array");
  }
  const expected = map.k * map.h * map.w;
  if (map.data.length !== expected) {
    throw new FormatError(
      `map data length ${map.data.length} does not match K*H*W = ${expected}`
    );
  }
}

export function checkLabelMask(mask: LabelMask): void {
  checkDims("h", mask.h);
  checkDims("w", mask.w);
  if (!(mask.labels instanceof Uint8Array)) {
    throw new FormatError("mask labels must be a Uint8Array");
  }
  if (mask.labels.length !== mask.h * mask.w) {
    throw new FormatError(
      `mask length ${mask.labels.length} does not match H*W = ${mask.h * mask.w}`
    );
  }
}

export function encodeOpm1(map: DenseMap, kind: number): Buffer {
  checkDenseMap(map);
  if (kind !== KIND_PROBS && kind !== KIND_LOGITS) {
    throw new FormatError(`unknown OPM1 kind flag ${kind}`);
  }
  const out = Buffer.alloc(OPM1_HEADER_BYTES + 8 * map.data.length);
  out.write(OPM1_MAGIC, 0, "ascii");
  out.writeUInt8(kind, 4);
  out.writeUInt32LE(map.k, 5);
  out.writeUInt32LE(map.h, 9);
  out.writeUInt32LE(map.w, 13);
  for (let i = 0; i < map.data.length; i++) {
    out.writeDoubleLE(map.data[i], OPM1_HEADER_BYTES + 8 * i);
  }
  return out;
}

export function decodeOpm1(buf: Buffer): { map: DenseMap; kind: number } {
  if (buf.length < 4 || buf.toString("ascii", 0, 4) !== OPM1_MAGIC) {
    throw new FormatError("bad OPM1 magic at offset 0");
  }
  if (buf.length < OPM1_HEADER_BYTES) {
    throw new FormatError(`truncated OPM1 header: ${buf.length} bytes < 17`);
  }
  const kind = buf.readUInt8(4);
  if (kind !== KIND_PROBS && kind !== KIND_LOGITS) {
    throw new FormatError(`unknown OPM1 kind flag ${kind} at offset 4`);
  }
  const k = buf.readUInt32LE(5);
  const h = buf.readUInt32LE(9);
  const w = buf.readUInt32LE(13);
  const expected = OPM1_HEADER_BYTES + 8 * k * h * w;
  if (buf.length !== expected) {
    throw new FormatError(
      `OPM1 payload length mismatch: expected ${expected} bytes, got ${buf.length}`
    );
  }
  const data = new Float64Array(k * h * w);
  for (let i = 0; i < data.length; i++) {
    data[i] = buf.readDoubleLE(OPM1_HEADER_BYTES + 8 * i);
  }
  return { map: { k, h, w, data }, kind };
}

export function encodePgm(mask: LabelMask): Buffer {
  checkLabelMask(mask);
  const header = Buffer.from(`P5\n${mask.w} ${mask.h}\n255\n`, "ascii");
  return Buffer.concat([header, Buffer.from(mask.labels)]);
}

export function decodePgm(buf: Buffer): LabelMask {
  if (buf.toString("ascii", 0, 2) !== "P5") {
    throw new FormatError("bad PGM magic at offset 0, expected P5");
  }
  const fields: number[] = [];
  let pos = 2;
  while (fields.length < 3) {
    while (pos < buf.length && isWhitespace(buf[pos])) pos++;
    if (pos < buf.length && buf[pos] === 0x23) {
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      continue;
    }
    const start = pos;
    while (pos < buf.length && !isWhitespace(buf[pos])) pos++;
    if (start === pos) {
      throw new FormatError(`truncated PGM header at offset ${pos}`);
    }
    fields.push(Number(buf.toString("ascii", start, pos)));
  }
  pos++; // single whitespace after maxval
  const [w, h, maxval] = fields;
  if (!Number.isInteger(w) || !Number.isInteger(h) || !Number.isInteger(maxval)) {
    throw new FormatError("non-numeric PGM header field");
  }
  if (maxval !== 255) {
    throw new FormatError(`PGM maxval must be 255, got ${maxval}`);
  }
  const payload = buf.subarray(pos);
  if (payload.length !== w * h) {
    throw new FormatError(
      `PGM payload length mismatch: expected ${w * h} bytes, got ${payload.length}`
    );
  }
  return { h, w, labels: new Uint8Array(payload) };
}

function isWhitespace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;
}
