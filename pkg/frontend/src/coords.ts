/** Canvas <-> curve coordinate transforms.
 *
 * Curve space is [0,1] x [0,1] with value 1 at the TOP of the canvas.
 * Pixel space covers [0, width-1] x [0, height-1], so the extreme
 * pixels land exactly on t=0/1 and v=0/1 and the round trip is exact
 * up to floating-point noise (far below one pixel).
 */

export function clamp01(x: number): number {
  return x < 0 ? 0 : x > 1 ? 1 : x;
}

export function tToX(t: number, width: number): number {
  return clamp01(t) * (width - 1);
}

export function xToT(x: number, width: number): number {
  return clamp01(x / (width - 1));
}

export function valueToY(v: number, height: number): number {
  return (1 - clamp01(v)) * (height - 1);
}

export function yToValue(y: number, height: number): number {
  return clamp01(1 - y / (height - 1));
}

/** Map a pointer event position in CSS pixels onto the canvas's own
 * pixel grid (the canvas may be scaled by layout). */
export function pointerToCanvas(
  cssX: number, cssY: number,
  rect: { left: number; top: number; width: number; height: number },
  canvas: { width: number; height: number },
): { x: number; y: number } {
  const x = ((cssX - rect.left) / rect.width) * canvas.width;
  const y = ((cssY - rect.top) / rect.height) * canvas.height;
  return {
    x: Math.min(Math.max(x, 0), canvas.width - 1),
    y: Math.min(Math.max(y, 0), canvas.height - 1),
  };
}
