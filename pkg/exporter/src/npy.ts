/**
 * Writer (and a small reader, used by the tests) for the tensor interchange
 * format: version 1.0, C-order, little-endian float32 only.
 *
 * Layout: 6-byte magic \x93NUMPY, version bytes (1, 0), uint16-LE header
 * length, a Python-literal header dict padded with spaces so the whole
 * preamble is a multiple of 64 bytes and terminated by a newline, then
 * prod(shape) * 4 bytes of raw little-endian float32.
 */

const MAGIC = [0x93, 0x4e, 0x55, 0x4d, 0x50, 0x59];

export class TensorFormatError extends Error {}

function shapeRepr(shape: number[]): string {
  if (shape.length === 1) return `(${shape[0]},)`;
  return `(${shape.join(', ')})`;
}

export function encodeTensor(shape: number[], data: Float32Array): Uint8Array {
  const count = shape.reduce((a, b) => a * b, 1);
  if (shape.some(d => !Number.isInteger(d) || d < 0)) {
    throw new TensorFormatError(`bad shape [${shape}]`);
  }
  if (data.length !== count) {
    throw new TensorFormatError(
      `shape (${shape}) needs ${count} values, got ${data.length}`);
  }
  const dict = `{'descr': '<f4', 'fortran_order': False, 'shape': ${shapeRepr(shape)}, }`;
  const base = MAGIC.length + 2 + 2;
  const pad = (64 - ((base + dict.length + 1) % 64)) % 64;
  const header = dict + ' '.repeat(pad) + '\n';
  if (header.length > 0xffff) {
    throw new TensorFormatError('header too large for version 1.0');
  }

  const out = new Uint8Array(base + header.length + count * 4);
  out.set(MAGIC, 0);
  out[6] = 1;
  out[7] = 0;
  out[8] = header.length & 0xff;
  out[9] = header.length >>> 8;
  for (let i = 0; i < header.length; i++) out[10 + i] = header.charCodeAt(i);
  const view = new DataView(out.buffer, base + header.length);
  for (let i = 0; i < count; i++) view.setFloat32(i * 4, data[i], true);
  return out;
}

/** Minimal decoder for round-trip tests; rejects anything outside the subset. */
export function decodeTensor(bytes: Uint8Array): { shape: number[]; data: Float32Array } {
  if (bytes.length < 10 || !MAGIC.every((b, i) => bytes[i] === b)) {
    throw new TensorFormatError('bad magic');
  }
  if (bytes[6] !== 1 || bytes[7] !== 0) {
    throw new TensorFormatError(`unsupported version ${bytes[6]}.${bytes[7]}`);
  }
  const headerLen = bytes[8] | (bytes[9] << 8);
  const headerEnd = 10 + headerLen;
  if (bytes.length < headerEnd) throw new TensorFormatError('truncated header');
  const header = Buffer.from(bytes.subarray(10, headerEnd)).toString('latin1');
  const m = header.match(
    /^\{'descr': '<f4', 'fortran_order': False, 'shape': \(([0-9, ]*)\), \}\s*\n$/);
  if (!m) throw new TensorFormatError(`unsupported header: ${header.trim()}`);
  const shape = m[1].split(',').map(s => s.trim()).filter(s => s.length > 0).map(Number);
  const count = shape.reduce((a, b) => a * b, 1);
  const payload = bytes.subarray(headerEnd);
  if (payload.length !== count * 4) {
    throw new TensorFormatError(
      `payload is ${payload.length} bytes, shape (${shape}) needs ${count * 4}`);
  }
  const data = new Float32Array(count);
  const view = new DataView(payload.buffer, payload.byteOffset, payload.byteLength);
  for (let i = 0; i < count; i++) data[i] = view.getFloat32(i * 4, true);
  return { shape, data };
}
