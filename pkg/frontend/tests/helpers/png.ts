/** Reference grayscale PNG encoder for decoder fixtures. */

import { deflateSync } from "node:zlib";

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff;
  for (const b of bytes) {
    c = (CRC_TABLE[(c ^ b) & 0xff] ?? 0) ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

export function chunk(type: string, data: Uint8Array): Uint8Array {
  const out = new Uint8Array(12 + data.length);
  const dv = new DataView(out.buffer);
  dv.setUint32(0, data.length);
  for (let i = 0; i < 4; i++) out[4 + i] = type.charCodeAt(i);
  out.set(data, 8);
  dv.setUint32(8 + data.length, crc32(out.subarray(4, 8 + data.length)));
  return out;
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

/** Forward scanline filter (the inverse of what the decoder undoes). */
function filterRow(
  raw: Uint8Array,
  prev: Uint8Array | null,
  bpp: number,
  filter: number,
): Uint8Array {
  const out = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) {
    const x = raw[i] ?? 0;
    const left = i >= bpp ? (raw[i - bpp] ?? 0) : 0;
    const up = prev === null ? 0 : (prev[i] ?? 0);
    const upLeft = prev !== null && i >= bpp ? (prev[i - bpp] ?? 0) : 0;
    let value: number;
    switch (filter) {
      case 0: value = x; break;
      case 1: value = x - left; break;
      case 2: value = x - up; break;
      case 3: value = x - ((left + up) >> 1); break;
      case 4: value = x - paeth(left, up, upLeft); break;
      default: throw new Error(`bad filter ${filter}`);
    }
    out[i] = value & 0xff;
  }
  return out;
}

export interface EncodeOptions {
  bitDepth?: 8 | 16;
  colorType?: number;
  filters?: number[];
  idatSplit?: number;
  interlace?: number;
}

export function encodePng(
  ids: number[][],
  {
    bitDepth = 16,
    colorType = 0,
    filters,
    idatSplit,
    interlace = 0,
  }: EncodeOptions = {},
): Uint8Array {
  const height = ids.length;
  const width = ids[0]?.length ?? 0;
  const channels = colorType === 2 ? 3 : 1;
  const bpp = (bitDepth / 8) * channels;
  const stride = width * bpp;
  const body = new Uint8Array(height * (stride + 1));
  let prev: Uint8Array | null = null;
  for (let y = 0; y < height; y++) {
    const raw = new Uint8Array(stride);
    for (let x = 0; x < width; x++) {
      const value = ids[y]?.[x] ?? 0;
      for (let ch = 0; ch < channels; ch++) {
        if (bitDepth === 16) {
          raw[(x * channels + ch) * 2] = (value >> 8) & 0xff;
          raw[(x * channels + ch) * 2 + 1] = value & 0xff;
        } else {
          raw[x * channels + ch] = value & 0xff;
        }
      }
    }
    const filter = filters?.[y % (filters.length || 1)] ?? 0;
    body[y * (stride + 1)] = filter;
    body.set(filterRow(raw, prev, bpp, filter), y * (stride + 1) + 1);
    prev = raw;
  }
  const ihdr = new Uint8Array(13);
  const dv = new DataView(ihdr.buffer);
  dv.setUint32(0, width);
  dv.setUint32(4, height);
  ihdr[8] = bitDepth;
  ihdr[9] = colorType;
  ihdr[12] = interlace;
  const compressed = new Uint8Array(deflateSync(body));
  const parts: Uint8Array[] = [
    new Uint8Array([137, 80, 78, 71, 13, 10, 26, 10]),
    chunk("IHDR", ihdr),
  ];
  if (idatSplit !== undefined && idatSplit < compressed.length) {
    parts.push(chunk("IDAT", compressed.subarray(0, idatSplit)));
    parts.push(chunk("IDAT", compressed.subarray(idatSplit)));
  } else {
    parts.push(chunk("IDAT", compressed));
  }
  parts.push(chunk("IEND", new Uint8Array(0)));
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let at = 0;
  for (const p of parts) {
    out.set(p, at);
    at += p.length;
  }
  return out;
}

export function grid(width: number, height: number, fn: (x: number, y: number) => number): number[][] {
  return Array.from({ length: height }, (_, y) =>
    Array.from({ length: width }, (_, x) => fn(x, y)),
  );
}

