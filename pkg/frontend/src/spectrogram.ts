/** Paint the server's log-magnitude matrix onto a canvas.
 *
 * The matrix arrives row-major as [time][bin] in dB. Time runs left to
 * right; bin 0 (DC) is drawn at the bottom. The image is built at the
 * matrix's native resolution and stretched to the canvas.
 */

import type { Spectrogram } from "./api.js";
import { buildLut, dbToIndex } from "./colormap.js";

export function renderSpectrogram(
  spec: Spectrogram,
  canvas: HTMLCanvasElement,
): void {
  const { rows, cols, data } = spec;
  if (rows < 1 || cols < 1 || data.length !== rows * cols) return;
  const lut = buildLut();
  const image = new ImageData(rows, cols);
  const px = image.data;
  for (let t = 0; t < rows; t++) {
    for (let bin = 0; bin < cols; bin++) {
      const idx = dbToIndex(data[t * cols + bin]);
      // x = time, y = flipped bin (low frequencies at the bottom)
      const out = ((cols - 1 - bin) * rows + t) * 4;
      px[out] = lut[idx * 3];
      px[out + 1] = lut[idx * 3 + 1];
      px[out + 2] = lut[idx * 3 + 2];
      px[out + 3] = 255;
    }
  }
  const native = document.createElement("canvas");
  native.width = rows;
  native.height = cols;
  native.getContext("2d")!.putImageData(image, 0, 0);
  const ctx = canvas.getContext("2d")!;
  ctx.imageSmoothingEnabled = true;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(native, 0, 0, canvas.width, canvas.height);
}
