// DOM rendering for the side panel: score popups, scenario results, the
// staged-edit list, and the run history. Numbers coming back from the
// service are either shown verbatim or rounded for display; nothing is
// recomputed here.

import { describeEdit, formatMean, formatPercent, verbatim } from './format.js';
import type { HistoryEntry } from './state.js';
import type { EditDoc, ScenarioResponse, ScoreResponse } from './types.js';

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function row(label: string, value: string): HTMLElement {
  const line = el('div', 'row');
  line.appendChild(el('span', 'label', label));
  line.appendChild(el('span', 'value', value));
  return line;
}

/** Point score for a clicked location. Safety and risk are shown verbatim. */
export function renderScorePopup(container: HTMLElement, score: ScoreResponse): void {
  container.replaceChildren();
  const popup = el('div', 'score-popup');
  popup.appendChild(el('h3', 'title', `Segment ${score.edge_id}`));
  popup.appendChild(row('safety', verbatim(score.safety)));
  popup.appendChild(row('risk', verbatim(score.risk)));
  popup.appendChild(
    row('snapped to', `${score.snapped.lon.toFixed(5)}, ${score.snapped.lat.toFixed(5)}`),
  );
  popup.appendChild(row('snap distance', `${score.snap_distance_m.toFixed(1)} m`));
  const features = el('div', 'features');
  features.appendChild(el('h4', 'subtitle', 'segment features'));
  for (const [name, value] of Object.entries(score.features)) {
    features.appendChild(row(name, verbatim(value)));
  }
  popup.appendChild(features);
  container.appendChild(popup);
}

/** Service rejection, reason text shown exactly as the service sent it. */
export function renderError(container: HTMLElement, reason: string): void {
  container.replaceChildren();
  container.appendChild(el('div', 'error', reason));
}

/** Before/after panel for a completed scenario run. */
export function renderScenarioPanel(container: HTMLElement, result: ScenarioResponse): void {
  container.replaceChildren();
  const panel = el('div', 'scenario-panel');
  panel.appendChild(
    el(
      'div',
      'means',
      `${formatMean(result.mean_baseline)} → ${formatMean(result.mean_scenario)}`,
    ),
  );
  panel.appendChild(el('div', 'percent', formatPercent(result.relative_change)));
  panel.appendChild(row('sampled points', String(result.n_points)));
  const edits = el('div', 'edit-reports');
  for (const report of result.edits) {
    const line = el('div', 'edit-report', `matched ${report.matched}, changed ${report.changed}`);
    if (report.warning) {
      line.appendChild(el('span', 'warning', ` ${report.warning}`));
    }
    edits.appendChild(line);
  }
  panel.appendChild(edits);
  container.appendChild(panel);
}

/** Staged edits with a remove control per entry. */
export function renderEditList(
  container: HTMLElement,
  edits: readonly EditDoc[],
  onRemove: (index: number) => void,
): void {
  container.replaceChildren();
  const list = el('ul', 'edit-list');
  edits.forEach((edit, index) => {
    const item = el('li', 'edit-item', describeEdit(edit));
    const remove = el('button', 'remove', 'remove');
    remove.addEventListener('click', () => onRemove(index));
    item.appendChild(remove);
    list.appendChild(item);
  });
  container.appendChild(list);
}

/** Past runs, newest first. Restoring a run stages its edits again. */
export function renderHistory(
  container: HTMLElement,
  entries: readonly HistoryEntry[],
  onRestore?: (entry: HistoryEntry) => void,
): void {
  container.replaceChildren();
  const list = el('ol', 'history');
  for (const entry of [...entries].reverse()) {
    const text =
      `run ${entry.requestId}: ${entry.edits.length} edits, ` +
      `${formatMean(entry.result.mean_baseline)} → ` +
      `${formatMean(entry.result.mean_scenario)} (${formatPercent(entry.result.relative_change)})`;
    const item = el('li', 'history-entry', text);
    if (onRestore) {
      const restore = el('button', 'restore', 'branch from here');
      restore.addEventListener('click', () => onRestore(entry));
      item.appendChild(restore);
    }
    list.appendChild(item);
  }
  container.appendChild(list);
}
