import fs from 'node:fs';
import { PNG } from 'pngjs';

/** Write an RGB PNG whose pixels come from `pixel(x, y)`. */
export function writePng(
  filePath: string,
  width: number,
  height: number,
  pixel: (x: number, y: number) => [number, number, number],
): void {
  const png = new PNG({ width, height });
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const idx = 4 * (y * width + x);
      const [r, g, b] = pixel(x, y);
      png.data[idx] = r;
      png.data[idx + 1] = g;
      png.data[idx + 2] = b;
      png.data[idx + 3] = 255;
    }
  }
  fs.writeFileSync(filePath, PNG.sync.write(png));
}

/** Deterministic pseudo-random pixel function for fixture images. */
export function seededPixel(seed: number): (x: number, y: number) => [number, number, number] {
  return (x, y) => {
    let h = (seed * 374761393 + x * 668265263 + y * 2246822519) >>> 0;
    h = Math.imul(h ^ (h >>> 13), 1274126177) >>> 0;
    return [h & 0xff, (h >>> 8) & 0xff, (h >>> 16) & 0xff];
  };
}
