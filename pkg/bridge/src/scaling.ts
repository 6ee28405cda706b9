/**
 * Per-window MinMax scaling. The window's minimum becomes the center and its
 * range the scale, so scaled values land in [0, 1]. A window whose range is
 * below 1e-12 keeps scale 1.0 and centers on the minimum; the forward map
 * then sends the constant to zero and the inverse returns it untouched,
 * instead of dividing by (near) zero.
 */

export interface MinMax {
  center: number;
  scale: number;
}

export function fitMinMax(values: number[]): MinMax {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  const range = hi - lo;
  return { center: lo, scale: range < 1e-12 ? 1.0 : range };
}

export function applyMinMax(m: MinMax, values: number[]): number[] {
  return values.map((v) => (v - m.center) / m.scale);
}

export function invertMinMax(m: MinMax, values: number[]): number[] {
  return values.map((v) => v * m.scale + m.center);
}
