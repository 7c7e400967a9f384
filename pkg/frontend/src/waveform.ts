/** Paint min/max amplitude pairs as a classic waveform column plot. */

export function renderWaveform(
  pairs: [number, number][],
  canvas: HTMLCanvasElement,
): void {
  const ctx = canvas.getContext("2d")!;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  if (pairs.length === 0) return;
  const mid = height / 2;
  const amp = height / 2 - 1;
  ctx.strokeStyle = "#7fb4e0";
  ctx.lineWidth = 1;
  ctx.beginPath();
  for (let i = 0; i < pairs.length; i++) {
    const x = (i / Math.max(pairs.length - 1, 1)) * (width - 1) + 0.5;
    const [lo, hi] = pairs[i];
    ctx.moveTo(x, mid - hi * amp);
    ctx.lineTo(x, mid - lo * amp);
  }
  ctx.stroke();
  ctx.strokeStyle = "#3a5a78";
  ctx.beginPath();
  ctx.moveTo(0, mid + 0.5);
  ctx.lineTo(width, mid + 0.5);
  ctx.stroke();
}
