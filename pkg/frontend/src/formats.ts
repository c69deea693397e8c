/**
 * Binary codecs for the tensor and mask files the camcond CLI emits.
 *
 * Tensor layout: 8-byte magic "CCTENSOR", u32 version (1), u32 dtype tag
 * (0 = f32), u32 rank, rank u64 dims, then row-major little-endian f32
 * payload. Mask layout: 8-byte magic "CCEPMASK", u32 version, u32 h,
 * u32 w, f64 ratio, then h*w rows of ceil(2*h*w/8) bytes packed LSB-first
 * with zero padding bits. All integers little-endian.
 */

const TENSOR_MAGIC = "CCTENSOR";
const MASK_MAGIC = "CCEPMASK";
const FORMAT_VERSION = 1;
const DTYPE_F32 = 0;

export interface Tensor {
  shape: number[];
  /** Row-major payload, length = product(shape). */
  data: Float32Array;
}

export interface Mask {
  h: number;
  w: number;
  ratio: number;
  /** Unpacked bits, row-major (h*w rows, 2*h*w columns), 0 or 1. */
  bits: Uint8Array;
}

function magicOf(buf: Uint8Array): string {
  return String.fromCharCode(...buf.subarray(0, 8));
}

function product(dims: number[]): number {
  let n = 1;
  for (const d of dims) n *= d;
  return n;
}

export function readTensor(buf: Uint8Array): Tensor {
  if (magicOf(buf) !== TENSOR_MAGIC) {
    throw new Error("not a tensor file (bad magic)");
  }
  if (buf.length < 20) {
    throw new Error("truncated tensor header");
  }
  const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  const version = view.getUint32(8, true);
  if (version !== FORMAT_VERSION) {
    throw new Error(`unsupported tensor version ${version}`);
  }
  const dtype = view.getUint32(12, true);
  if (dtype !== DTYPE_F32) {
    throw new Error(`unsupported dtype tag ${dtype}`);
  }
  const rank = view.getUint32(16, true);
  if (buf.length < 20 + 8 * rank) {
    throw new Error("truncated tensor dims");
  }
  const shape: number[] = [];
  for (let i = 0; i < rank; i++) {
    const dim = view.getBigUint64(20 + 8 * i, true);
    if (dim > BigInt(Number.MAX_SAFE_INTEGER)) {
      throw new Error(`dimension ${dim} too large`);
    }
    shape.push(Number(dim));
  }
  const offset = 20 + 8 * rank;
  const count = product(shape);
  if (buf.length !== offset + 4 * count) {
    throw new Error(
      `payload length ${buf.length - offset} does not match dims ` +
        `(${4 * count} bytes expected)`,
    );
  }
  // copy byte-wise: Node Buffers alias a shared pool, and their slice()
  // is a view, so the payload must be lifted out explicitly (this also
  // sidesteps Float32Array alignment requirements)
  const data = new Float32Array(count);
  new Uint8Array(data.buffer).set(
    buf.subarray(offset, offset + 4 * count),
  );
  return { shape, data };
}

export function writeTensor(tensor: Tensor): Uint8Array {
  const { shape, data } = tensor;
  if (data.length !== product(shape)) {
    throw new Error(
      `payload has ${data.length} elements, shape wants ${product(shape)}`,
    );
  }
  const headerSize = 20 + 8 * shape.length;
  const out = new Uint8Array(headerSize + 4 * data.length);
  const view = new DataView(out.buffer);
  for (let i = 0; i < 8; i++) out[i] = TENSOR_MAGIC.charCodeAt(i);
  view.setUint32(8, FORMAT_VERSION, true);
  view.setUint32(12, DTYPE_F32, true);
  view.setUint32(16, shape.length, true);
  shape.forEach((dim, i) => view.setBigUint64(20 + 8 * i, BigInt(dim), true));
  out.set(new Uint8Array(data.buffer, data.byteOffset, 4 * data.length),
          headerSize);
  return out;
}

export function readMask(buf: Uint8Array): Mask {
  if (magicOf(buf) !== MASK_MAGIC) {
    throw new Error("not a mask file (bad magic)");
  }
  if (buf.length < 28) {
    throw new Error("truncated mask header");
  }
  const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  const version = view.getUint32(8, true);
  if (version !== FORMAT_VERSION) {
    throw new Error(`unsupported mask version ${version}`);
  }
  const h = view.getUint32(12, true);
  const w = view.getUint32(16, true);
  const ratio = view.getFloat64(20, true);
  if (h < 1 || w < 1) {
    throw new Error(`bad mask dimensions ${h}x${w}`);
  }
  const nQueries = h * w;
  const nKeys = 2 * nQueries;
  const rowBytes = Math.ceil(nKeys / 8);
  if (buf.length !== 28 + nQueries * rowBytes) {
    throw new Error(
      `mask payload is ${buf.length - 28} bytes, ` +
        `expected ${nQueries * rowBytes}`,
    );
  }
  const bits = new Uint8Array(nQueries * nKeys);
  for (let row = 0; row < nQueries; row++) {
    const base = 28 + row * rowBytes;
    for (let bit = 0; bit < 8 * rowBytes; bit++) {
      const set = (buf[base + (bit >> 3)] >> (bit & 7)) & 1;
      if (bit < nKeys) {
        bits[row * nKeys + bit] = set;
      } else if (set) {
        throw new Error("nonzero padding bits");
      }
    }
  }
  return { h, w, ratio, bits };
}

export function writeMask(mask: Mask): Uint8Array {
  const { h, w, ratio, bits } = mask;
  const nQueries = h * w;
  const nKeys = 2 * nQueries;
  if (bits.length !== nQueries * nKeys) {
    throw new Error(
      `bits has ${bits.length} entries, ${h}x${w} wants ${nQueries * nKeys}`,
    );
  }
  const rowBytes = Math.ceil(nKeys / 8);
  const out = new Uint8Array(28 + nQueries * rowBytes);
  const view = new DataView(out.buffer);
  for (let i = 0; i < 8; i++) out[i] = MASK_MAGIC.charCodeAt(i);
  view.setUint32(8, FORMAT_VERSION, true);
  view.setUint32(12, h, true);
  view.setUint32(16, w, true);
  view.setFloat64(20, ratio, true);
  for (let row = 0; row < nQueries; row++) {
    const base = 28 + row * rowBytes;
    for (let bit = 0; bit < nKeys; bit++) {
      if (bits[row * nKeys + bit]) {
        out[base + (bit >> 3)] |= 1 << (bit & 7);
      }
    }
  }
  return out;
}
