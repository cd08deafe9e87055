// Display formatting. The only arithmetic allowed here is rounding: every
// number shown in the UI is a service response field or its rounded form.

import type { EditDoc } from './types.js';

/**
 * Signed whole-number percent of a relative change: 0.2593 -> "+26%",
 * -0.12 -> "-12%". A change that rounds to zero renders as "+0.0%" so the
 * panel still reads as an explicit before/after delta.
 */
export function formatPercent(relativeChange: number): string {
  const pct = Math.round(relativeChange * 100);
  if (pct === 0) {
    return '+0.0%';
  }
  return pct > 0 ? `+${pct}%` : `${pct}%`;
}

/** Mean safety for the before/after panel, two decimals: 0.54, 0.68. */
export function formatMean(value: number): string {
  return value.toFixed(2);
}

/** Full-precision rendering for values that must be shown verbatim. */
export function verbatim(value: number): string {
  return String(value);
}

/** Short label for an edit document, e.g. "bikelane = true (4 classes)". */
export function describeEdit(edit: EditDoc): string {
  const [attribute, value] = Object.entries(edit.set)[0] ?? ['?', '?'];
  const parts: string[] = [];
  if (edit.select.edge_ids) {
    parts.push(`${edit.select.edge_ids.length} edges`);
  }
  if (edit.select.classes) {
    parts.push(`${edit.select.classes.length} classes`);
  }
  if (edit.select.polygon) {
    parts.push('in region');
  }
  return `${attribute.replace('set_', '')} = ${String(value)} (${parts.join(', ')})`;
}
