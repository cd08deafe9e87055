// Planar helpers for the SVG map: an equirectangular lon/lat-to-pixel
// projection and the polygon checks run before a scenario is submitted.

import type { Bbox, LonLat } from './types.js';

export interface Projection {
  toScreen(p: LonLat): [number, number];
  toLonLat(x: number, y: number): LonLat;
}

/**
 * Fit a lon/lat bounding box into a width x height pixel viewport. Latitude
 * is scaled by cos(mid latitude) so street lengths keep their proportions;
 * the axis with spare room is centred. Screen y grows downward.
 */
export function makeProjection(bbox: Bbox, width: number, height: number): Projection {
  const [minLon, minLat, maxLon, maxLat] = bbox;
  const midLat = (minLat + maxLat) / 2;
  const kLon = Math.cos((midLat * Math.PI) / 180);
  const spanX = (maxLon - minLon) * kLon;
  const spanY = maxLat - minLat;
  const scale = Math.min(width / spanX, height / spanY);
  const offsetX = (width - spanX * scale) / 2;
  const offsetY = (height - spanY * scale) / 2;

  return {
    toScreen([lon, lat]: LonLat): [number, number] {
      const x = offsetX + (lon - minLon) * kLon * scale;
      const y = offsetY + (maxLat - lat) * scale;
      return [x, y];
    },
    toLonLat(x: number, y: number): LonLat {
      const lon = minLon + (x - offsetX) / (kLon * scale);
      const lat = maxLat - (y - offsetY) / scale;
      return [lon, lat];
    },
  };
}

function orientation(a: LonLat, b: LonLat, c: LonLat): number {
  return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

function onSegment(a: LonLat, b: LonLat, p: LonLat): boolean {
  return (
    Math.min(a[0], b[0]) <= p[0] &&
    p[0] <= Math.max(a[0], b[0]) &&
    Math.min(a[1], b[1]) <= p[1] &&
    p[1] <= Math.max(a[1], b[1])
  );
}

/** Whether segments ab and cd intersect, touching endpoints included. */
export function segmentsIntersect(a: LonLat, b: LonLat, c: LonLat, d: LonLat): boolean {
  const o1 = orientation(a, b, c);
  const o2 = orientation(a, b, d);
  const o3 = orientation(c, d, a);
  const o4 = orientation(c, d, b);
  if (o1 * o2 < 0 && o3 * o4 < 0) {
    return true;
  }
  if (o1 === 0 && onSegment(a, b, c)) return true;
  if (o2 === 0 && onSegment(a, b, d)) return true;
  if (o3 === 0 && onSegment(c, d, a)) return true;
  if (o4 === 0 && onSegment(c, d, b)) return true;
  return false;
}

/**
 * A drawable region: at least three vertices and no two non-adjacent sides
 * crossing. Run before submitting a scenario so a bowtie never reaches the
 * service.
 */
export function isSimplePolygon(vertices: LonLat[]): boolean {
  const n = vertices.length;
  if (n < 3) {
    return false;
  }
  for (let i = 0; i < n; i++) {
    const a = vertices[i];
    const b = vertices[(i + 1) % n];
    for (let j = i + 1; j < n; j++) {
      const adjacent = j === i + 1 || (i === 0 && j === n - 1);
      if (adjacent) {
        continue;
      }
      const c = vertices[j];
      const d = vertices[(j + 1) % n];
      if (segmentsIntersect(a, b, c, d)) {
        return false;
      }
    }
  }
  return true;
}

/** Bounding box of a set of line strings, padded by a fraction of its span. */
export function lineStringsBbox(lines: LonLat[][], padFraction = 0.05): Bbox {
  let minLon = Infinity;
  let minLat = Infinity;
  let maxLon = -Infinity;
  let maxLat = -Infinity;
  for (const line of lines) {
    for (const [lon, lat] of line) {
      minLon = Math.min(minLon, lon);
      minLat = Math.min(minLat, lat);
      maxLon = Math.max(maxLon, lon);
      maxLat = Math.max(maxLat, lat);
    }
  }
  const padLon = (maxLon - minLon) * padFraction || 1e-4;
  const padLat = (maxLat - minLat) * padFraction || 1e-4;
  return [minLon - padLon, minLat - padLat, maxLon + padLon, maxLat + padLat];
}

export function formatBbox(bbox: Bbox): string {
  return bbox.map((v) => v.toFixed(6)).join(',');
}
