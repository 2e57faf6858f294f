/**
 * Heat colors for fashionability: warmer = more fashionable.
 *
 * One ramp serves both the result overlay (colored by rank within the
 * returned set, rank 1 warmest) and the backdrop (colored by epoch
 * percentile). The legend gradient is generated from the same stops so
 * the ranking bar always matches what is drawn.
 */

const STOPS: Array<[number, [number, number, number]]> = [
  [0.0, [59, 76, 192]],    // cool blue
  [0.5, [245, 213, 71]],   // yellow
  [1.0, [180, 4, 38]],     // warm red
];

/** t in [0,1], 1 = warmest. */
export function heatColor(t: number): string {
  const clamped = Math.min(Math.max(t, 0), 1);
  for (let i = 1; i < STOPS.length; i++) {
    const [t1, c1] = STOPS[i];
    const [t0, c0] = STOPS[i - 1];
    if (clamped <= t1) {
      const f = (clamped - t0) / (t1 - t0);
      const rgb = c0.map((a, ch) => Math.round(a + (c1[ch] - a) * f));
      return `rgb(${rgb[0]},${rgb[1]},${rgb[2]})`;
    }
  }
  const last = STOPS[STOPS.length - 1][1];
  return `rgb(${last[0]},${last[1]},${last[2]})`;
}

/** Rank 1 of m gets the warmest color; rank m the coolest. */
export function colorForRank(rank: number, total: number): string {
  if (total <= 1) return heatColor(1);
  return heatColor((total - rank) / (total - 1));
}

/** Percentile 100 is warmest. */
export function colorForPercentile(percentile: number): string {
  return heatColor(percentile / 100);
}

/** CSS gradient string for the legend bar (cool left, warm right). */
export function legendGradient(): string {
  const parts = STOPS.map(
    ([t, [r, g, b]]) => `rgb(${r},${g},${b}) ${Math.round(t * 100)}%`,
  );
  return `linear-gradient(to right, ${parts.join(", ")})`;
}
