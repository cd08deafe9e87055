// SVG street map. Fetched segments are cached on the client; toggling the
// risk layer or redrawing the polygon re-renders from that cache, and only
// an explicit refresh goes back to the service.

import { safetyColor } from './color.js';
import { lineStringsBbox, makeProjection, type Projection } from './geometry.js';
import type { Bbox, DeltaFeature, LonLat, SegmentsResponse } from './types.js';

const SVG_NS = 'http://www.w3.org/2000/svg';
const NEUTRAL_STROKE = '#888888';

export class SvgMap {
  readonly svg: SVGSVGElement;

  private readonly width: number;
  private readonly height: number;
  private readonly segmentLayer: SVGGElement;
  private readonly deltaLayer: SVGGElement;
  private readonly polygonLayer: SVGGElement;

  private data: SegmentsResponse | null = null;
  private deltas: DeltaFeature[] = [];
  private polygon: LonLat[] = [];
  private projection: Projection | null = null;
  private riskLayerOn = true;
  private clickHandler: ((p: LonLat) => void) | null = null;
  private segmentClickHandler: ((edgeId: string) => void) | null = null;

  constructor(container: HTMLElement, width = 800, height = 600) {
    this.width = width;
    this.height = height;
    this.svg = document.createElementNS(SVG_NS, 'svg');
    this.svg.setAttribute('width', String(width));
    this.svg.setAttribute('height', String(height));
    this.svg.setAttribute('viewBox', `0 0 ${width} ${height}`);
    this.segmentLayer = document.createElementNS(SVG_NS, 'g');
    this.deltaLayer = document.createElementNS(SVG_NS, 'g');
    this.polygonLayer = document.createElementNS(SVG_NS, 'g');
    this.segmentLayer.setAttribute('class', 'segments');
    this.deltaLayer.setAttribute('class', 'deltas');
    this.polygonLayer.setAttribute('class', 'polygon');
    this.svg.appendChild(this.segmentLayer);
    this.svg.appendChild(this.deltaLayer);
    this.svg.appendChild(this.polygonLayer);
    container.appendChild(this.svg);

    this.svg.addEventListener('click', (event) => {
      if (!this.projection || !this.clickHandler) {
        return;
      }
      const rect = this.svg.getBoundingClientRect();
      const x = (event as MouseEvent).clientX - rect.left;
      const y = (event as MouseEvent).clientY - rect.top;
      this.clickHandler(this.projection.toLonLat(x, y));
    });
  }

  onMapClick(handler: (p: LonLat) => void): void {
    this.clickHandler = handler;
  }

  onSegmentClick(handler: (edgeId: string) => void): void {
    this.segmentClickHandler = handler;
  }

  get bbox(): Bbox | null {
    return this.data
      ? lineStringsBbox(this.data.features.map((f) => f.geometry.coordinates))
      : null;
  }

  /** Replace the cached segment data and redraw everything. */
  setData(data: SegmentsResponse): void {
    this.data = data;
    const bbox = lineStringsBbox(data.features.map((f) => f.geometry.coordinates));
    this.projection = makeProjection(bbox, this.width, this.height);
    this.render();
  }

  /** Show or hide the risk colouring; redraws from cache, no refetch. */
  setRiskLayer(on: boolean): void {
    this.riskLayerOn = on;
    this.render();
  }

  get riskLayer(): boolean {
    return this.riskLayerOn;
  }

  setDeltaPoints(points: DeltaFeature[]): void {
    this.deltas = points;
    this.render();
  }

  clearDeltaPoints(): void {
    this.setDeltaPoints([]);
  }

  setPolygon(vertices: LonLat[]): void {
    this.polygon = vertices;
    this.render();
  }

  private render(): void {
    this.segmentLayer.replaceChildren();
    this.deltaLayer.replaceChildren();
    this.polygonLayer.replaceChildren();
    if (!this.data || !this.projection) {
      return;
    }
    const project = this.projection;

    for (const feature of this.data.features) {
      const points = feature.geometry.coordinates
        .map((p) => project.toScreen(p))
        .map(([x, y]) => `${x.toFixed(1)},${y.toFixed(1)}`)
        .join(' ');
      const path = document.createElementNS(SVG_NS, 'polyline');
      path.setAttribute('points', points);
      path.setAttribute('fill', 'none');
      path.setAttribute('stroke-width', '3');
      path.setAttribute(
        'stroke',
        this.riskLayerOn ? safetyColor(feature.properties.safety_midpoint) : NEUTRAL_STROKE,
      );
      path.setAttribute('data-edge-id', feature.properties.edge_id);
      if (this.segmentClickHandler) {
        path.addEventListener('click', (event) => {
          event.stopPropagation();
          this.segmentClickHandler?.(feature.properties.edge_id);
        });
      }
      this.segmentLayer.appendChild(path);
    }

    for (const delta of this.deltas) {
      const [x, y] = project.toScreen(delta.geometry.coordinates);
      const circle = document.createElementNS(SVG_NS, 'circle');
      circle.setAttribute('cx', x.toFixed(1));
      circle.setAttribute('cy', y.toFixed(1));
      circle.setAttribute('r', '5');
      circle.setAttribute('fill', delta.properties.delta >= 0 ? '#1a9850' : '#d73027');
      circle.setAttribute('fill-opacity', '0.8');
      const title = document.createElementNS(SVG_NS, 'title');
      title.textContent = `delta ${delta.properties.delta}`;
      circle.appendChild(title);
      this.deltaLayer.appendChild(circle);
    }

    if (this.polygon.length) {
      const points = this.polygon
        .map((p) => project.toScreen(p))
        .map(([x, y]) => `${x.toFixed(1)},${y.toFixed(1)}`)
        .join(' ');
      const outline = document.createElementNS(SVG_NS, 'polygon');
      outline.setAttribute('points', points);
      outline.setAttribute('fill', '#4575b4');
      outline.setAttribute('fill-opacity', '0.15');
      outline.setAttribute('stroke', '#4575b4');
      outline.setAttribute('stroke-dasharray', '4 3');
      this.polygonLayer.appendChild(outline);
      for (const vertex of this.polygon) {
        const [x, y] = project.toScreen(vertex);
        const marker = document.createElementNS(SVG_NS, 'circle');
        marker.setAttribute('cx', x.toFixed(1));
        marker.setAttribute('cy', y.toFixed(1));
        marker.setAttribute('r', '3');
        marker.setAttribute('fill', '#4575b4');
        this.polygonLayer.appendChild(marker);
      }
    }
  }
}
