// Application bootstrap: wires the API client, session state, map, and
// panels together. The only configuration is the service base URL, taken
// from ?api=... or window.BIKERISK_API.

import { ApiClient, ApiError } from './api.js';
import { legendStops } from './color.js';
import { isSimplePolygon } from './geometry.js';
import { SvgMap } from './map.js';
import {
  renderEditList,
  renderError,
  renderHistory,
  renderScenarioPanel,
  renderScorePopup,
} from './panel.js';
import { Session } from './state.js';
import type { EditDoc, LonLat } from './types.js';

declare global {
  interface Window {
    BIKERISK_API?: string;
  }
}

const WORLD_BBOX: [number, number, number, number] = [-180, -90, 180, 90];

type ClickMode = 'score' | 'draw';

function need(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node;
}

function reasonOf(err: unknown): string {
  if (err instanceof ApiError) {
    return err.reason;
  }
  return err instanceof Error ? err.message : String(err);
}

function buildLegend(container: HTMLElement): void {
  container.replaceChildren();
  for (const stop of legendStops(6)) {
    const chip = document.createElement('span');
    chip.className = 'legend-chip';
    chip.style.background = stop.color;
    chip.textContent = stop.safety.toFixed(1);
    container.appendChild(chip);
  }
}

export function start(): void {
  const params = new URLSearchParams(window.location.search);
  const baseUrl = params.get('api') ?? window.BIKERISK_API ?? 'http://127.0.0.1:8000';
  const client = new ApiClient(baseUrl);
  const session = new Session();
  const map = new SvgMap(need('map'));

  const modelSelect = need('model') as HTMLSelectElement;
  const modeInputs = Array.from(
    document.querySelectorAll<HTMLInputElement>('input[name="mode"]'),
  );
  const scoreBox = need('score');
  const resultBox = need('result');
  const historyBox = need('history');
  const editsBox = need('edits');
  const noticeBox = need('notice');

  const clickMode = (): ClickMode =>
    (modeInputs.find((input) => input.checked)?.value as ClickMode) ?? 'score';

  const notice = (text: string): void => {
    noticeBox.textContent = text;
  };

  const refreshEdits = (): void => {
    renderEditList(editsBox, session.stagedEdits, (index) => {
      session.removeEdit(index);
      refreshEdits();
    });
  };

  const refreshHistory = (): void => {
    renderHistory(historyBox, session.history, (entry) => {
      session.clearEdits();
      for (const edit of entry.edits) {
        session.stageEdit(edit);
      }
      refreshEdits();
      notice(`staged the ${entry.edits.length} edits from run ${entry.requestId}`);
    });
  };

  const loadSegments = async (): Promise<void> => {
    if (!session.model) {
      return;
    }
    const data = await client.segments(WORLD_BBOX, session.model);
    if (!data.features.length) {
      notice('no street segments in view');
      return;
    }
    map.setData(data);
    notice(`${data.features.length} segments loaded for ${data.model}`);
  };

  map.onMapClick((point: LonLat) => {
    if (clickMode() === 'draw') {
      session.polygon.push(point);
      map.setPolygon(session.polygon);
      return;
    }
    if (!session.model) {
      return;
    }
    client
      .score(point[1], point[0], session.model)
      .then((score) => renderScorePopup(scoreBox, score))
      .catch((err) => renderError(scoreBox, reasonOf(err)));
  });

  modelSelect.addEventListener('change', () => {
    session.model = modelSelect.value;
    loadSegments().catch((err) => notice(reasonOf(err)));
  });

  (need('layer-toggle') as HTMLInputElement).addEventListener('change', (event) => {
    map.setRiskLayer((event.target as HTMLInputElement).checked);
  });

  need('clear-region').addEventListener('click', () => {
    session.polygon = [];
    map.setPolygon([]);
  });

  need('add-edit').addEventListener('click', () => {
    const attribute = (need('edit-attribute') as HTMLSelectElement).value;
    const rawValue = (need('edit-value') as HTMLInputElement).value.trim();
    const rawClasses = (need('edit-classes') as HTMLInputElement).value.trim();
    const useRegion = (need('edit-use-region') as HTMLInputElement).checked;

    const select: EditDoc['select'] = {};
    if (rawClasses) {
      select.classes = rawClasses.split(',').map((c) => c.trim()).filter(Boolean);
    }
    if (useRegion) {
      if (session.polygon.length < 3) {
        notice('draw a region with at least three vertices first');
        return;
      }
      select.polygon = session.polygon.map((p) => [...p] as LonLat);
    }
    if (!select.classes && !select.polygon) {
      notice('an edit needs street classes, a region, or both');
      return;
    }

    let change: EditDoc['set'];
    if (attribute === 'set_bikelane') {
      if (rawValue !== 'true' && rawValue !== 'false') {
        notice('bikelane value must be true or false');
        return;
      }
      change = { set_bikelane: rawValue === 'true' };
    } else {
      const num = Number(rawValue);
      if (!Number.isFinite(num) || num <= 0) {
        notice(`${attribute} needs a positive number`);
        return;
      }
      change = attribute === 'set_width' ? { set_width: num } : { set_speed_limit: num };
    }

    session.stageEdit({ select, set: change });
    refreshEdits();
  });

  need('run-scenario').addEventListener('click', () => {
    if (!session.model) {
      notice('select a model first');
      return;
    }
    if (session.polygon.length < 3 || !isSimplePolygon(session.polygon)) {
      notice('draw a simple polygon with at least three vertices');
      return;
    }
    const edits = session.stagedEdits.map((e) => ({ ...e }));
    const requestId = session.beginRequest();
    client
      .scenario({
        model: session.model,
        region: session.polygon.map((p) => [...p] as LonLat),
        edits,
      })
      .then((result) => {
        if (!session.acceptResult(requestId, edits, result)) {
          return;
        }
        renderScenarioPanel(resultBox, result);
        map.setDeltaPoints(result.points.features);
        refreshHistory();
      })
      .catch((err) => renderError(resultBox, reasonOf(err)));
  });

  buildLegend(need('legend'));
  refreshEdits();
  refreshHistory();

  client
    .models()
    .then((models) => {
      modelSelect.replaceChildren();
      for (const model of models) {
        const option = document.createElement('option');
        option.value = model.city;
        const { from, to } = model.train_window;
        option.textContent = from && to ? `${model.city} (${from} to ${to})` : model.city;
        modelSelect.appendChild(option);
      }
      if (models.length) {
        session.model = models[0].city;
        modelSelect.value = models[0].city;
        return loadSegments();
      }
      notice('the service has no models loaded');
      return undefined;
    })
    .catch((err) => notice(reasonOf(err)));
}

if (typeof document !== 'undefined' && document.getElementById('map')) {
  start();
}
