// @vitest-environment jsdom
import { describe, expect, it, vi } from 'vitest';

import {
  renderEditList,
  renderError,
  renderHistory,
  renderScenarioPanel,
  renderScorePopup,
} from '../src/panel.js';
import type { HistoryEntry } from '../src/state.js';
import type { ScenarioResponse, ScoreResponse } from '../src/types.js';

const SCORE: ScoreResponse = {
  model: 'demo',
  graph_id: 'abc123def456',
  edge_id: 'w103.1',
  snapped: { lon: -0.0951, lat: 51.5058 },
  snap_distance_m: 3.2,
  features: {
    speed_limit: 48.3,
    width: 6.1,
    betweenness: 0.0712345678901234,
    dist_intersect: 22.5,
    hilly: 0,
    curved: 1,
    bikelane: 0,
  },
  risk: 0.4476480632176548,
  safety: 0.5523519367823452,
};

function scenario(): ScenarioResponse {
  return {
    model: 'demo',
    graph_id: 'abc123def456',
    mean_baseline: 0.5400000000000001,
    mean_scenario: 0.6799999999999999,
    relative_change: 0.2592592592592593,
    relative_change_text: '26%',
    n_points: 4,
    edits: [{ attribute: 'bikelane', matched: 4, changed: 4, warning: null }],
    points: { type: 'FeatureCollection', features: [] },
  };
}

describe('renderScorePopup', () => {
  it('shows the safety value verbatim, every digit', () => {
    const box = document.createElement('div');
    renderScorePopup(box, SCORE);
    expect(box.textContent).toContain('0.5523519367823452');
    expect(box.textContent).toContain('0.4476480632176548');
    expect(box.textContent).toContain('w103.1');
  });

  it('lists every feature with its verbatim value', () => {
    const box = document.createElement('div');
    renderScorePopup(box, SCORE);
    for (const [name, value] of Object.entries(SCORE.features)) {
      expect(box.textContent).toContain(name);
      expect(box.textContent).toContain(String(value));
    }
  });

  it('replaces the previous popup', () => {
    const box = document.createElement('div');
    renderScorePopup(box, SCORE);
    renderScorePopup(box, { ...SCORE, edge_id: 'w200.0' });
    expect(box.querySelectorAll('.score-popup')).toHaveLength(1);
    expect(box.textContent).toContain('w200.0');
    expect(box.textContent).not.toContain('w103.1');
  });
});

describe('renderError', () => {
  it('shows the reason text exactly as the service sent it', () => {
    const box = document.createElement('div');
    renderError(box, 'no segment within 50.0 m of (51.6, -0.0955)');
    expect(box.textContent).toBe('no segment within 50.0 m of (51.6, -0.0955)');
  });
});

describe('renderScenarioPanel', () => {
  it('shows rounded means and the signed percent change', () => {
    const box = document.createElement('div');
    renderScenarioPanel(box, scenario());
    expect(box.querySelector('.means')?.textContent).toBe('0.54 → 0.68');
    expect(box.querySelector('.percent')?.textContent).toBe('+26%');
    expect(box.textContent).toContain('matched 4, changed 4');
  });

  it('shows +0.0% when nothing changed', () => {
    const result = { ...scenario(), mean_scenario: 0.54, relative_change: 0, edits: [] };
    const box = document.createElement('div');
    renderScenarioPanel(box, result);
    expect(box.querySelector('.percent')?.textContent).toBe('+0.0%');
  });

  it('surfaces edit warnings', () => {
    const result = scenario();
    result.edits[0].warning = 'selector matched no edges';
    const box = document.createElement('div');
    renderScenarioPanel(box, result);
    expect(box.querySelector('.warning')?.textContent).toContain('selector matched no edges');
  });
});

describe('renderEditList', () => {
  it('wires the remove button to the right index', () => {
    const box = document.createElement('div');
    const onRemove = vi.fn();
    renderEditList(
      box,
      [
        { select: { classes: ['primary'] }, set: { set_bikelane: true } },
        { select: { classes: ['secondary'] }, set: { set_width: 4.5 } },
      ],
      onRemove,
    );
    const buttons = box.querySelectorAll('button.remove');
    expect(buttons).toHaveLength(2);
    (buttons[1] as HTMLButtonElement).click();
    expect(onRemove).toHaveBeenCalledWith(1);
  });
});

describe('renderHistory', () => {
  it('lists runs newest first and restores a chosen run', () => {
    const entries: HistoryEntry[] = [
      { requestId: 1, edits: [], result: { ...scenario(), mean_scenario: 0.6 } },
      { requestId: 2, edits: [], result: scenario() },
    ];
    const box = document.createElement('div');
    const onRestore = vi.fn();
    renderHistory(box, entries, onRestore);

    const items = box.querySelectorAll('.history-entry');
    expect(items).toHaveLength(2);
    expect(items[0].textContent).toContain('run 2');
    expect(items[1].textContent).toContain('run 1');

    (items[1].querySelector('button') as HTMLButtonElement).click();
    expect(onRestore).toHaveBeenCalledWith(entries[0]);
  });
});
