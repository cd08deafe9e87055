import type {
  Bbox,
  ModelSummary,
  ScenarioRequest,
  ScenarioResponse,
  ScoreResponse,
  SegmentsResponse,
  ServiceError,
} from './types.js';

/** A non-2xx service response; `reason` is the service's text, verbatim. */
export class ApiError extends Error {
  readonly status: number;
  readonly reason: string;

  constructor(status: number, reason: string) {
    super(`${status}: ${reason}`);
    this.name = 'ApiError';
    this.status = status;
    this.reason = reason;
  }
}

async function asError(response: Response): Promise<ApiError> {
  try {
    const body = (await response.json()) as ServiceError;
    return new ApiError(body.status, body.reason);
  } catch {
    return new ApiError(response.status, response.statusText);
  }
}

export class ApiClient {
  readonly baseUrl: string;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, '');
  }

  private async get<T>(path: string, params: Record<string, string>): Promise<T> {
    const url = new URL(this.baseUrl + path);
    for (const [key, value] of Object.entries(params)) {
      url.searchParams.set(key, value);
    }
    const response = await fetch(url.toString());
    if (!response.ok) {
      throw await asError(response);
    }
    return (await response.json()) as T;
  }

  async models(): Promise<ModelSummary[]> {
    return this.get<ModelSummary[]>('/v1/models', {});
  }

  async score(lat: number, lon: number, model: string): Promise<ScoreResponse> {
    return this.get<ScoreResponse>('/v1/score', {
      lat: String(lat),
      lon: String(lon),
      model,
    });
  }

  async segments(bbox: Bbox, model: string): Promise<SegmentsResponse> {
    return this.get<SegmentsResponse>('/v1/segments', {
      bbox: bbox.join(','),
      model,
    });
  }

  async scenario(request: ScenarioRequest): Promise<ScenarioResponse> {
    const response = await fetch(this.baseUrl + '/v1/scenario', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(request),
    });
    if (!response.ok) {
      throw await asError(response);
    }
    return (await response.json()) as ScenarioResponse;
  }
}
