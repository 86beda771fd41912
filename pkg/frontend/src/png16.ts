/** Minimal decoder for the service's label-map PNGs.
 *
 * Label maps are non-interlaced grayscale PNGs whose sample values are
 * label IDs (16-bit on the wire; 8-bit also accepted). Drawing such a
 * PNG to a canvas would quantize the IDs to 8 bits, so the overlay
 * path decodes the file directly: parse chunks, inflate the IDAT zlib
 * stream with DecompressionStream, undo per-scanline filters, and read
 * big-endian samples. Anything fancier (color, palette, interlace) is
 * rejected rather than guessed at.
 */

export interface LabelGrid {
  width: number;
  height: number;
  /** Row-major label IDs, length width * height. */
  ids: Uint16Array;
}

const SIGNATURE = [137, 80, 78, 71, 13, 10, 26, 10];

function u32(bytes: Uint8Array, at: number): number {
  return (
    ((bytes[at] ?? 0) << 24) |
    ((bytes[at + 1] ?? 0) << 16) |
    ((bytes[at + 2] ?? 0) << 8) |
    (bytes[at + 3] ?? 0)
  ) >>> 0;
}

async function inflate(data: Uint8Array): Promise<Uint8Array> {
  const stream = new Blob([new Uint8Array(data)])
    .stream()
    .pipeThrough(new DecompressionStream("deflate"));
  return new Uint8Array(await new Response(stream).arrayBuffer());
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

function unfilter(raw: Uint8Array, width: number, height: number, bpp: number): Uint8Array {
  const stride = width * bpp;
  if (raw.length < height * (stride + 1)) {
    throw new Error("label map: truncated pixel data");
  }
  const out = new Uint8Array(height * stride);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)] ?? 0;
    const src = y * (stride + 1) + 1;
    const dst = y * stride;
    for (let i = 0; i < stride; i++) {
      const x = raw[src + i] ?? 0;
      const left = i >= bpp ? (out[dst + i - bpp] ?? 0) : 0;
      const up = y > 0 ? (out[dst + i - stride] ?? 0) : 0;
      const upLeft = y > 0 && i >= bpp ? (out[dst + i - stride - bpp] ?? 0) : 0;
      let value: number;
      switch (filter) {
        case 0: value = x; break;
        case 1: value = x + left; break;
        case 2: value = x + up; break;
        case 3: value = x + ((left + up) >> 1); break;
        case 4: value = x + paeth(left, up, upLeft); break;
        default: throw new Error(`label map: unknown scanline filter ${filter}`);
      }
      out[dst + i] = value & 0xff;
    }
  }
  return out;
}

export async function decodeLabelMap(bytes: Uint8Array): Promise<LabelGrid> {
  for (let i = 0; i < SIGNATURE.length; i++) {
    if (bytes[i] !== SIGNATURE[i]) throw new Error("label map: not a PNG");
  }
  let width = 0;
  let height = 0;
  let bitDepth = 0;
  const idat: Uint8Array[] = [];
  let at = 8;
  while (at + 8 <= bytes.length) {
    const length = u32(bytes, at);
    const type = String.fromCharCode(
      bytes[at + 4] ?? 0, bytes[at + 5] ?? 0, bytes[at + 6] ?? 0, bytes[at + 7] ?? 0,
    );
    const data = bytes.subarray(at + 8, at + 8 + length);
    if (type === "IHDR") {
      width = u32(data, 0);
      height = u32(data, 4);
      bitDepth = data[8] ?? 0;
      const colorType = data[9] ?? 0;
      const interlace = data[12] ?? 0;
      if (colorType !== 0) throw new Error("label map: expected grayscale PNG");
      if (bitDepth !== 8 && bitDepth !== 16) {
        throw new Error(`label map: unsupported bit depth ${bitDepth}`);
      }
      if (interlace !== 0) throw new Error("label map: interlacing not supported");
    } else if (type === "IDAT") {
      idat.push(data);
    } else if (type === "IEND") {
      break;
    }
    at += 12 + length; // length + type + data + crc
  }
  if (width === 0 || height === 0 || idat.length === 0) {
    throw new Error("label map: missing IHDR or IDAT");
  }
  const zlibData = new Uint8Array(idat.reduce((n, c) => n + c.length, 0));
  let offset = 0;
  for (const chunk of idat) {
    zlibData.set(chunk, offset);
    offset += chunk.length;
  }
  const bpp = bitDepth / 8;
  const pixels = unfilter(await inflate(zlibData), width, height, bpp);
  const ids = new Uint16Array(width * height);
  if (bitDepth === 16) {
    for (let i = 0; i < ids.length; i++) {
      ids[i] = ((pixels[2 * i] ?? 0) << 8) | (pixels[2 * i + 1] ?? 0);
    }
  } else {
    ids.set(pixels.subarray(0, ids.length));
  }
  return { width, height, ids };
}
