// Client-side session state. The service holds no state between requests,
// so everything the user builds up lives here: the chosen model, the edits
// staged so far, the drawn region, and the run history.

import type { EditDoc, LonLat, ScenarioResponse } from './types.js';

export interface HistoryEntry {
  requestId: number;
  edits: EditDoc[];
  result: ScenarioResponse;
}

export class Session {
  model: string | null = null;
  polygon: LonLat[] = [];

  private staged: EditDoc[] = [];
  private runs: HistoryEntry[] = [];
  private nextRequestId = 1;
  private latestRequestId = 0;

  get stagedEdits(): readonly EditDoc[] {
    return this.staged;
  }

  get history(): readonly HistoryEntry[] {
    return this.runs;
  }

  stageEdit(edit: EditDoc): void {
    this.staged.push(edit);
  }

  removeEdit(index: number): void {
    if (index < 0 || index >= this.staged.length) {
      return;
    }
    this.staged.splice(index, 1);
  }

  clearEdits(): void {
    this.staged = [];
  }

  /** Allocate an id for an in-flight scenario request. */
  beginRequest(): number {
    const id = this.nextRequestId++;
    this.latestRequestId = id;
    return id;
  }

  /**
   * Record a completed run. Returns false and stores nothing when a newer
   * request was started after this one, so a slow response never overwrites
   * a fresher result.
   */
  acceptResult(requestId: number, edits: EditDoc[], result: ScenarioResponse): boolean {
    if (requestId !== this.latestRequestId) {
      return false;
    }
    this.runs.push({ requestId, edits: edits.map((e) => ({ ...e })), result });
    return true;
  }

  get lastResult(): ScenarioResponse | null {
    return this.runs.length ? this.runs[this.runs.length - 1].result : null;
  }
}
