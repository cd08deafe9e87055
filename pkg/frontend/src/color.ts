// Safety-to-colour mapping for the segment layer. Linear interpolation in
// RGB between red (safety 0) and green (safety 1); out-of-range inputs clamp.

const RED: [number, number, number] = [215, 48, 39];
const GREEN: [number, number, number] = [26, 152, 80];

export function safetyColor(safety: number): string {
  const t = Math.min(1, Math.max(0, safety));
  const channel = (i: number) => Math.round(RED[i] + t * (GREEN[i] - RED[i]));
  return `rgb(${channel(0)}, ${channel(1)}, ${channel(2)})`;
}

/** Evenly spaced legend stops from safety 0 to 1. */
export function legendStops(n: number): Array<{ safety: number; color: string }> {
  const stops: Array<{ safety: number; color: string }> = [];
  for (let i = 0; i < n; i++) {
    const safety = n === 1 ? 0 : i / (n - 1);
    stops.push({ safety, color: safetyColor(safety) });
  }
  return stops;
}
