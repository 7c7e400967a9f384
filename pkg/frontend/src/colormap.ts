/** Perceptual colormap for the spectrogram, over a fixed dB range. */

export const DB_MIN = -80;
export const DB_MAX = 0;

export function clampDb(db: number): number {
  return db < DB_MIN ? DB_MIN : db > DB_MAX ? DB_MAX : db;
}

/** Viridis anchor stops (matplotlib's perceptually uniform default). */
const STOPS: [number, number, number][] = [
  [68, 1, 84],
  [71, 44, 122],
  [59, 81, 139],
  [44, 113, 142],
  [33, 144, 141],
  [39, 173, 129],
  [92, 200, 99],
  [170, 220, 50],
  [253, 231, 37],
];

/** Map a dB value (clamped to [DB_MIN, DB_MAX]) to an RGB triple. */
export function dbToColor(db: number): [number, number, number] {
  const u = (clampDb(db) - DB_MIN) / (DB_MAX - DB_MIN);
  const pos = u * (STOPS.length - 1);
  const i = Math.min(Math.floor(pos), STOPS.length - 2);
  const f = pos - i;
  const a = STOPS[i];
  const b = STOPS[i + 1];
  return [
    Math.round(a[0] + f * (b[0] - a[0])),
    Math.round(a[1] + f * (b[1] - a[1])),
    Math.round(a[2] + f * (b[2] - a[2])),
  ];
}

/** 256-entry lookup table for fast per-pixel mapping. */
export function buildLut(): Uint8ClampedArray {
  const lut = new Uint8ClampedArray(256 * 3);
  for (let i = 0; i < 256; i++) {
    const db = DB_MIN + (i / 255) * (DB_MAX - DB_MIN);
    const [r, g, b] = dbToColor(db);
    lut[i * 3] = r;
    lut[i * 3 + 1] = g;
    lut[i * 3 + 2] = b;
  }
  return lut;
}

/** Index into the LUT for a dB value. */
export function dbToIndex(db: number): number {
  const u = (clampDb(db) - DB_MIN) / (DB_MAX - DB_MIN);
  return Math.round(u * 255);
}
