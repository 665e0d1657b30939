import * as fs from "fs";
import * as os from "os";

// DSTK: 52-byte little-endian header followed by t*h*w float32 values in
// [t][row][col] order.  NaN payloads are canonicalized to the quiet-NaN bit
// pattern 0x7FC00000 so files are byte-reproducible.
const HEADER_BYTES = 52;
const MAGIC = "DSTK";
const VERSION = 1;
const QUIET_NAN_BITS = 0x7fc00000;
const MAX_VOXELS = 2 ** 31;

export interface Stack {
  t: number;
  h: number;
  w: number;
  xOrigin: number;
  yOrigin: number;
  cellSize: number;
  epochDays: number; // days since 1970-01-01 of the first acquisition
  stepDays: number;
  values: Float32Array; // length t*h*w
}

function requireLittleEndianHost(): void {
  if (os.endianness() !== "LE") {
    throw new Error("big-endian hosts are not supported");
  }
}

export function writeStack(path: string, stack: Stack): void {
  requireLittleEndianHost();
  const n = stack.t * stack.h * stack.w;
  if (stack.values.length !== n) {
    throw new Error(`payload length ${stack.values.length} != t*h*w = ${n}`);
  }
  const buf = Buffer.alloc(HEADER_BYTES + 4 * n);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt16LE(VERSION, 4);
  buf.writeUInt16LE(0, 6);
  buf.writeUInt32LE(stack.t, 8);
  buf.writeUInt32LE(stack.h, 12);
  buf.writeUInt32LE(stack.w, 16);
  buf.writeDoubleLE(stack.xOrigin, 20);
  buf.writeDoubleLE(stack.yOrigin, 28);
  buf.writeDoubleLE(stack.cellSize, 36);
  buf.writeInt32LE(stack.epochDays, 44);
  buf.writeInt32LE(stack.stepDays, 48);
  const payload = new Float32Array(stack.values);
  const bits = new Uint32Array(payload.buffer);
  for (let i = 0; i < n; i++) {
    if (Number.isNaN(payload[i])) bits[i] = QUIET_NAN_BITS;
  }
  Buffer.from(payload.buffer).copy(buf, HEADER_BYTES);
  fs.writeFileSync(path, buf);
}

export function readStack(path: string): Stack {
  requireLittleEndianHost();
  const raw = fs.readFileSync(path);
  if (raw.length < HEADER_BYTES) {
    throw new Error(`${path}: truncated header (${raw.length} bytes)`);
  }
  const magic = raw.toString("ascii", 0, 4);
  if (magic !== MAGIC) {
    throw new Error(`${path}: bad magic ${JSON.stringify(magic)}`);
  }
  const version = raw.readUInt16LE(4);
  if (version !== VERSION) {
    throw new Error(`${path}: unsupported version ${version}`);
  }
  if (raw.readUInt16LE(6) !== 0) {
    throw new Error(`${path}: reserved field must be zero`);
  }
  const t = raw.readUInt32LE(8);
  const h = raw.readUInt32LE(12);
  const w = raw.readUInt32LE(16);
  if (t < 1 || h < 1 || w < 1) {
    throw new Error(`${path}: non-positive dimensions (${t}, ${h}, ${w})`);
  }
  const n = t * h * w;
  if (n > MAX_VOXELS) {
    throw new Error(`${path}: dimensions exceed ${MAX_VOXELS} voxels`);
  }
  const expected = HEADER_BYTES + 4 * n;
  if (raw.length < expected) {
    throw new Error(`${path}: truncated payload (${raw.length} of ${expected} bytes)`);
  }
  if (raw.length > expected) {
    throw new Error(`${path}: ${raw.length - expected} trailing bytes`);
  }
  const stepDays = raw.readInt32LE(48);
  if (stepDays < 1) {
    throw new Error(`${path}: non-positive step_days ${stepDays}`);
  }
  // Copy out of the file buffer so the typed array owns aligned memory.
  const values = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    values[i] = raw.readFloatLE(HEADER_BYTES + 4 * i);
  }
  return {
    t,
    h,
    w,
    xOrigin: raw.readDoubleLE(20),
    yOrigin: raw.readDoubleLE(28),
    cellSize: raw.readDoubleLE(36),
    epochDays: raw.readInt32LE(44),
    stepDays,
    values,
  };
}
