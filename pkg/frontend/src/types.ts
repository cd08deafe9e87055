// Shapes of the /v1 API. These mirror the service responses field for field;
// the UI never invents numeric fields of its own.

export type LonLat = [number, number];

export interface ModelSummary {
  city: string;
  columns: string[];
  coefficients: number[];
  standard_errors: number[];
  ci95: [number, number][];
  train_window: { from: string | null; to: string | null };
}

export interface SegmentFeatures {
  speed_limit: number;
  width: number;
  betweenness: number;
  dist_intersect: number;
  hilly: number;
  curved: number;
  bikelane: number;
}

export interface ScoreResponse {
  model: string;
  graph_id: string;
  edge_id: string;
  snapped: { lon: number; lat: number };
  snap_distance_m: number;
  features: SegmentFeatures;
  risk: number;
  safety: number;
}

export interface SegmentFeature {
  type: 'Feature';
  geometry: { type: 'LineString'; coordinates: LonLat[] };
  properties: {
    edge_id: string;
    highway: string;
    length_m: number;
    features: SegmentFeatures;
    risk_midpoint: number;
    safety_midpoint: number;
  };
}

export interface SegmentsResponse {
  type: 'FeatureCollection';
  model: string;
  graph_id: string;
  features: SegmentFeature[];
}

export interface EditSelector {
  edge_ids?: string[];
  classes?: string[];
  polygon?: LonLat[];
}

export interface EditChange {
  set_bikelane?: boolean;
  set_speed_limit?: number;
  set_width?: number;
}

export interface EditDoc {
  select: EditSelector;
  set: EditChange;
}

export interface EditReport {
  attribute: string;
  matched: number;
  changed: number;
  warning: string | null;
}

export interface ScenarioRequest {
  model: string;
  region: LonLat[];
  edits: EditDoc[];
  densify_m?: number;
}

export interface DeltaFeature {
  type: 'Feature';
  geometry: { type: 'Point'; coordinates: LonLat };
  properties: {
    edge_id: string;
    offset_m: number;
    baseline_safety: number;
    scenario_safety: number;
    delta: number;
  };
}

export interface ScenarioResponse {
  model: string;
  graph_id: string;
  mean_baseline: number;
  mean_scenario: number;
  relative_change: number;
  relative_change_text: string;
  n_points: number;
  edits: EditReport[];
  points: { type: 'FeatureCollection'; features: DeltaFeature[] };
}

export interface ServiceError {
  status: number;
  reason: string;
}

export type Bbox = [number, number, number, number]; // minlon, minlat, maxlon, maxlat
