/**
 * Decoder for binary PGM/PPM rasters (P5/P6, 8- or 16-bit big-endian
 * samples). Returns height x width x 3 float32 pixels in [0, 1]; grayscale
 * input is replicated across the three channels.
 */

export class ImageDecodeError extends Error {}

export interface Raster {
  width: number;
  height: number;
  /** HWC layout, 3 channels, values in [0, 1]. */
  data: Float32Array;
}

function isSpace(b: number): boolean {
  return b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d || b === 0x0c || b === 0x0b;
}

/** Reads the next whitespace-delimited integer, skipping '#' comments. */
function nextInt(bytes: Uint8Array, pos: { i: number }): number {
  while (pos.i < bytes.length) {
    if (bytes[pos.i] === 0x23) { // '#'
      while (pos.i < bytes.length && bytes[pos.i] !== 0x0a) pos.i++;
    } else if (isSpace(bytes[pos.i])) {
      pos.i++;
    } else {
      break;
    }
  }
  const start = pos.i;
  while (pos.i < bytes.length && !isSpace(bytes[pos.i])) pos.i++;
  const token = Buffer.from(bytes.subarray(start, pos.i)).toString('ascii');
  if (!/^[0-9]+$/.test(token)) {
    throw new ImageDecodeError(`expected an integer in header, got '${token}'`);
  }
  return parseInt(token, 10);
}

export function decodePnm(bytes: Uint8Array): Raster {
  if (bytes.length < 2) throw new ImageDecodeError('file too short');
  const magic = String.fromCharCode(bytes[0], bytes[1]);
  if (magic !== 'P5' && magic !== 'P6') {
    throw new ImageDecodeError(`unsupported magic '${magic}' (binary P5/P6 only)`);
  }
  const channels = magic === 'P6' ? 3 : 1;
  const pos = { i: 2 };
  const width = nextInt(bytes, pos);
  const height = nextInt(bytes, pos);
  const maxval = nextInt(bytes, pos);
  if (width < 1 || height < 1) {
    throw new ImageDecodeError(`bad dimensions ${width}x${height}`);
  }
  if (maxval < 1 || maxval > 65535) {
    throw new ImageDecodeError(`bad maxval ${maxval}`);
  }
  pos.i++; // single whitespace byte between maxval and raster
  const wide = maxval > 255;
  const samples = width * height * channels;
  const need = samples * (wide ? 2 : 1);
  if (bytes.length - pos.i < need) {
    throw new ImageDecodeError(
      `raster truncated: need ${need} bytes, have ${bytes.length - pos.i}`);
  }

  const data = new Float32Array(width * height * 3);
  for (let p = 0; p < width * height; p++) {
    for (let c = 0; c < 3; c++) {
      const s = channels === 3 ? p * 3 + c : p;
      const raw = wide
        ? (bytes[pos.i + 2 * s] << 8) | bytes[pos.i + 2 * s + 1]
        : bytes[pos.i + s];
      data[p * 3 + c] = raw / maxval;
    }
  }
  return { width, height, data };
}
