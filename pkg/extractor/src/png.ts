/** PNG decoding to packed RGB float data. */

import fs from 'node:fs';
import { PNG } from 'pngjs';

export interface RgbImage {
  width: number;
  height: number;
  /** height*width*3 values in 0..255, row-major, RGB. */
  data: Float32Array;
}

/** Decode a PNG file to RGB; any read or decode failure names the file. */
export function readPng(filePath: string): RgbImage {
  let buf: Buffer;
  try {
    buf = fs.readFileSync(filePath);
  } catch (err) {
    throw new Error(`cannot read image ${filePath}: ${(err as Error).message}`);
  }
  let png: PNG;
  try {
    png = PNG.sync.read(buf);
  } catch (err) {
    throw new Error(`cannot decode image ${filePath}: ${(err as Error).message}`);
  }
  const { width, height } = png;
  if (width < 1 || height < 1) {
    throw new Error(`cannot decode image ${filePath}: empty image`);
  }
  const data = new Float32Array(width * height * 3);
  // pngjs always yields RGBA; drop alpha.
  for (let i = 0, j = 0; i < width * height; i++, j += 4) {
    data[3 * i] = png.data[j];
    data[3 * i + 1] = png.data[j + 1];
    data[3 * i + 2] = png.data[j + 2];
  }
  return { width, height, data };
}
