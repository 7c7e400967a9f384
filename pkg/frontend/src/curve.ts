/** Drawing state for one control curve.
 *
 * A drag stroke records (t, v) samples; samples are kept unique and
 * sorted in t, so the curve is always a function of time. A stroke
 * also replaces whatever older points fall inside the time range it
 * covers, which makes redrawing over a region the natural edit
 * gesture.
 */

export interface CurvePoint {
  t: number;
  v: number;
}

/** Quantise t so duplicate pointer samples collapse (last one wins). */
const T_QUANTUM = 1e-4;

function quantise(t: number): number {
  return Math.round(t / T_QUANTUM) * T_QUANTUM;
}

export class CurveDraft {
  private prior: CurvePoint[] = [];
  private stroke = new Map<number, number>();
  private strokeMin = Infinity;
  private strokeMax = -Infinity;
  private drawing = false;

  get isEmpty(): boolean {
    return this.prior.length === 0 && this.stroke.size === 0;
  }

  beginStroke(t: number, v: number): void {
    this.drawing = true;
    this.stroke = new Map();
    this.strokeMin = Infinity;
    this.strokeMax = -Infinity;
    this.extendStroke(t, v);
  }

  extendStroke(t: number, v: number): void {
    if (!this.drawing) return;
    const qt = quantise(Math.min(Math.max(t, 0), 1));
    const qv = Math.min(Math.max(v, 0), 1);
    this.stroke.set(qt, qv);
    this.strokeMin = Math.min(this.strokeMin, qt);
    this.strokeMax = Math.max(this.strokeMax, qt);
  }

  endStroke(): void {
    if (!this.drawing) return;
    this.drawing = false;
    if (this.stroke.size === 0) return;
    const kept = this.prior.filter(
      (p) => p.t < this.strokeMin || p.t > this.strokeMax,
    );
    const added = [...this.stroke.entries()].map(([t, v]) => ({ t, v }));
    this.prior = [...kept, ...added].sort((a, b) => a.t - b.t);
    this.stroke = new Map();
  }

  clear(): void {
    this.prior = [];
    this.stroke = new Map();
    this.drawing = false;
  }

  /** Replace the whole draft with an already-stored curve. */
  setPoints(points: CurvePoint[]): void {
    this.prior = [...points].sort((a, b) => a.t - b.t);
    this.stroke = new Map();
    this.drawing = false;
  }

  /** Current curve, committed strokes plus the one in progress. */
  points(): CurvePoint[] {
    if (this.stroke.size === 0) return [...this.prior];
    const kept = this.prior.filter(
      (p) => p.t < this.strokeMin || p.t > this.strokeMax,
    );
    const added = [...this.stroke.entries()].map(([t, v]) => ({ t, v }));
    return [...kept, ...added].sort((a, b) => a.t - b.t);
  }

  /** Sparse form for POSTing: drop points that a straight line between
   * their neighbours already reproduces within tolerance. */
  toSparse(tolerance = 1 / 800): CurvePoint[] {
    return simplify(this.points(), tolerance);
  }
}

/** Ramer-Douglas-Peucker on the v axis (t is the parameter). */
export function simplify(points: CurvePoint[], tolerance: number): CurvePoint[] {
  if (points.length <= 2) return [...points];
  const keep = new Array<boolean>(points.length).fill(false);
  keep[0] = keep[points.length - 1] = true;
  const stack: [number, number][] = [[0, points.length - 1]];
  while (stack.length) {
    const [lo, hi] = stack.pop()!;
    const a = points[lo];
    const b = points[hi];
    let worst = -1;
    let worstErr = tolerance;
    for (let i = lo + 1; i < hi; i++) {
      const p = points[i];
      const span = b.t - a.t;
      const ref = span > 0 ? a.v + ((p.t - a.t) / span) * (b.v - a.v) : a.v;
      const err = Math.abs(p.v - ref);
      if (err > worstErr) {
        worstErr = err;
        worst = i;
      }
    }
    if (worst >= 0) {
      keep[worst] = true;
      stack.push([lo, worst], [worst, hi]);
    }
  }
  return points.filter((_, i) => keep[i]);
}

/** Piecewise-linear evaluation, mirroring how the server densifies. */
export function evaluate(points: CurvePoint[], t: number): number {
  if (points.length === 0) return 0;
  if (t <= points[0].t) return points[0].v;
  const last = points[points.length - 1];
  if (t >= last.t) return last.v;
  for (let i = 1; i < points.length; i++) {
    if (t <= points[i].t) {
      const a = points[i - 1];
      const b = points[i];
      const span = b.t - a.t;
      return span > 0 ? a.v + ((t - a.t) / span) * (b.v - a.v) : b.v;
    }
  }
  return last.v;
}
