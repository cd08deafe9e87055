"""Counterfactual street edits and area-level safety comparison.

An edit selects a set of segments (explicit ids, or road classes intersected
with a polygon) and overrides one attribute: bike lane presence, speed limit,
or width. Applying a list of edits yields a new graph; the original is never
mutated, so baseline and scenario can be scored side by side.

Area safety is the mean of segment safety s = 1 - risk over deterministic
sample points inside a region polygon (edge midpoints by default, optional
densification every `densify_m` meters). A scenario's effect is reported as
the relative change of that mean.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from . import geo
from .betweenness import BetweennessResult, edge_betweenness
from .graph import Edge, StreetGraph, segment_features
from .model import FittedModel, predict_risk

# Classes treated as local access streets, as opposed to the arterial classes
# that carry through traffic.
LOCAL_HIGHWAY_CLASSES = frozenset({"residential", "living_street", "service"})

_SETTABLE = {"bikelane": "set_bikelane", "speed_limit": "set_speed_limit", "width": "set_width"}

__all__ = [
    "LOCAL_HIGHWAY_CLASSES",
    "ScenarioError",
    "EditError",
    "Edit",
    "EditReport",
    "SamplePoint",
    "AreaSafety",
    "ScenarioResult",
    "parse_edits",
    "resolve_selector",
    "apply_edits",
    "sample_points",
    "area_safety",
    "compare_scenarios",
    "render_percent",
    "result_to_json",
    "result_to_geojson",
]


class ScenarioError(Exception):
    pass


class EditError(ScenarioError):
    """Malformed edit document (bad selector or change clause)."""


@dataclass(frozen=True)
class Edit:
    """One selector plus one attribute override."""

    attribute: str  # "bikelane" | "speed_limit" | "width"
    value: bool | float
    edge_ids: tuple[str, ...] | None = None
    classes: tuple[str, ...] | None = None
    polygon: tuple[geo.Point, ...] | None = None


@dataclass(frozen=True)
class EditReport:
    attribute: str
    matched: int
    changed: int
    warning: str | None = None


def _parse_polygon(raw: object) -> tuple[geo.Point, ...]:
    if not isinstance(raw, list) or len(raw) < 3:
        raise EditError("polygon must be a list of at least 3 [lon, lat] pairs")
    pts = []
    for p in raw:
        if not isinstance(p, list) or len(p) != 2:
            raise EditError(f"polygon vertex must be [lon, lat], got {p!r}")
        pts.append((float(p[0]), float(p[1])))
    return tuple(pts)


def parse_edits(raw: object) -> list[Edit]:
    """Validate and convert the JSON edit list.

    Each entry is {"select": {...}, "set": {...}}. A selector provides
    edge_ids, or classes and/or polygon; the change clause sets exactly one
    of bikelane (bool), speed_limit (km/h > 0), width (m > 0). An empty list
    is a valid no-op scenario.
    """
    if not isinstance(raw, list):
        raise EditError("edits must be a list")
    edits = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise EditError(f"edit {i} is not an object")
        unknown = set(entry) - {"select", "set"}
        if unknown:
            raise EditError(f"edit {i} has unknown keys: {', '.join(sorted(unknown))}")
        select = entry.get("select")
        change = entry.get("set")
        if not isinstance(select, dict) or not isinstance(change, dict):
            raise EditError(f"edit {i} needs 'select' and 'set' objects")

        unknown = set(select) - {"edge_ids", "classes", "polygon"}
        if unknown:
            raise EditError(f"edit {i} selector has unknown keys: {', '.join(sorted(unknown))}")
        edge_ids = select.get("edge_ids")
        classes = select.get("classes")
        polygon = select.get("polygon")
        if edge_ids is not None:
            if classes is not None or polygon is not None:
                raise EditError(f"edit {i}: edge_ids cannot be combined with classes/polygon")
            if not isinstance(edge_ids, list) or not all(isinstance(e, str) for e in edge_ids):
                raise EditError(f"edit {i}: edge_ids must be a list of strings")
            edge_ids = tuple(edge_ids)
        else:
            if classes is None and polygon is None:
                raise EditError(f"edit {i}: selector is empty")
            if classes is not None:
                if not isinstance(classes, list) or not all(isinstance(c, str) for c in classes):
                    raise EditError(f"edit {i}: classes must be a list of strings")
                classes = tuple(classes)
            if polygon is not None:
                polygon = _parse_polygon(polygon)

        keys = [k for k in ("set_bikelane", "set_speed_limit", "set_width") if k in change]
        unknown = set(change) - {"set_bikelane", "set_speed_limit", "set_width"}
        if unknown:
            raise EditError(f"edit {i} change has unknown keys: {', '.join(sorted(unknown))}")
        if len(keys) != 1:
            raise EditError(f"edit {i} must set exactly one attribute, got {len(keys)}")
        key = keys[0]
        value = change[key]
        if key == "set_bikelane":
            if not isinstance(value, bool):
                raise EditError(f"edit {i}: set_bikelane must be true or false")
            attribute, val = "bikelane", value
        elif key == "set_speed_limit":
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
                raise EditError(f"edit {i}: set_speed_limit must be a positive number")
            attribute, val = "speed_limit", float(value)
        else:
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
                raise EditError(f"edit {i}: set_width must be a positive number")
            attribute, val = "width", float(value)

        edits.append(
            Edit(attribute=attribute, value=val, edge_ids=edge_ids, classes=classes, polygon=polygon)
        )
    return edits


def resolve_selector(graph: StreetGraph, edit: Edit) -> list[str]:
    """Matching edge ids, sorted. Class and polygon parts are intersected."""
    if edit.edge_ids is not None:
        return sorted(e for e in edit.edge_ids if e in graph.edges)
    matched = []
    for eid in sorted(graph.edges):
        edge = graph.edges[eid]
        if edit.classes is not None and edge.highway not in edit.classes:
            continue
        if edit.polygon is not None and not geo.point_in_polygon(edge.midpoint(), edit.polygon):
            continue
        matched.append(eid)
    return matched


def _apply_one(edge: Edge, edit: Edit) -> Edge:
    if edit.attribute == "bikelane":
        return dataclasses.replace(edge, bikelane=bool(edit.value))
    if edit.attribute == "speed_limit":
        return dataclasses.replace(edge, speed_limit_kmh=float(edit.value))
    return dataclasses.replace(edge, width_m=float(edit.value))


def _differs(edge: Edge, edit: Edit) -> bool:
    if edit.attribute == "bikelane":
        return edge.bikelane != bool(edit.value)
    if edit.attribute == "speed_limit":
        return edge.speed_limit_kmh != float(edit.value)
    return edge.width_m != float(edit.value)


def apply_edits(graph: StreetGraph, edits: list[Edit]) -> tuple[StreetGraph, list[EditReport]]:
    """New graph with the edits applied in order, plus one report per edit.

    A selector that matches nothing is not an error; it yields a warning in
    its report so callers can surface it.
    """
    edges = dict(graph.edges)
    reports = []
    for edit in edits:
        ids = resolve_selector(graph, edit)
        changed = 0
        for eid in ids:
            if _differs(edges[eid], edit):
                edges[eid] = _apply_one(edges[eid], edit)
                changed += 1
        warning = "selector matched no edges" if not ids else None
        reports.append(EditReport(edit.attribute, matched=len(ids), changed=changed, warning=warning))
    return graph.copy_with_edges(edges), reports


@dataclass(frozen=True)
class SamplePoint:
    edge_id: str
    offset_m: float
    point: geo.Point


def sample_points(
    graph: StreetGraph,
    region: tuple[geo.Point, ...],
    densify_m: float | None = None,
) -> list[SamplePoint]:
    """Deterministic sample locations inside the region polygon.

    Default is one point per edge at its midpoint. With densify_m, points
    are placed every densify_m meters along each edge (starting at half a
    step) and filtered to the region. Sorted by (edge_id, offset).
    """
    if densify_m is not None and densify_m <= 0:
        raise ScenarioError(f"densify_m must be positive, got {densify_m}")
    pts: list[SamplePoint] = []
    for eid in sorted(graph.edges):
        edge = graph.edges[eid]
        if densify_m is None:
            offsets = [edge.length_m / 2.0]
        else:
            k = max(1, int(math.ceil(edge.length_m / densify_m)))
            step = edge.length_m / k
            offsets = [step * (j + 0.5) for j in range(k)]
        for off in offsets:
            p = geo.point_along_polyline(edge.geometry, off)
            if geo.point_in_polygon(p, region):
                pts.append(SamplePoint(eid, off, p))
    return pts


@dataclass
class AreaSafety:
    points: list[SamplePoint]
    safety: np.ndarray
    mean: float


def area_safety(
    model: FittedModel,
    graph: StreetGraph,
    betweenness: BetweennessResult,
    region: tuple[geo.Point, ...],
    points: list[SamplePoint] | None = None,
    densify_m: float | None = None,
) -> AreaSafety:
    """Mean segment safety s = 1 - risk over sample points in the region."""
    if points is None:
        points = sample_points(graph, region, densify_m=densify_m)
    if not points:
        raise ScenarioError("region contains no street segments")
    values = np.empty(len(points))
    for i, sp in enumerate(points):
        feats = segment_features(graph, betweenness, sp.edge_id, sp.point)
        values[i] = 1.0 - predict_risk(model, feats.as_dict())
    return AreaSafety(points=points, safety=values, mean=float(np.mean(values)))


@dataclass
class ScenarioResult:
    region: tuple[geo.Point, ...]
    points: list[SamplePoint]
    baseline: np.ndarray
    scenario: np.ndarray
    mean_baseline: float
    mean_scenario: float
    relative_change: float
    edit_reports: list[EditReport]


def compare_scenarios(
    model: FittedModel,
    graph: StreetGraph,
    betweenness: BetweennessResult,
    region: tuple[geo.Point, ...],
    edits: list[Edit],
    densify_m: float | None = None,
    recompute_betweenness: bool = False,
) -> ScenarioResult:
    """Baseline vs edited mean area safety over an identical point set.

    Points come from the baseline graph; edits change attributes, not
    geometry, so every point stays valid in the scenario graph. Betweenness
    is length-driven and is only recomputed on request.
    """
    points = sample_points(graph, region, densify_m=densify_m)
    if not points:
        raise ScenarioError("region contains no street segments")
    base = area_safety(model, graph, betweenness, region, points=points)
    edited, reports = apply_edits(graph, edits)
    beta2 = betweenness
    if recompute_betweenness:
        beta2 = edge_betweenness(
            edited,
            mode=betweenness.mode if betweenness.mode != "loaded" else "exact",
            sample_size=betweenness.sample_size,
            seed=betweenness.seed,
        )
    after = area_safety(model, edited, beta2, region, points=points)
    if base.mean == 0.0:
        raise ScenarioError("baseline mean safety is 0; relative change undefined")
    rel = (after.mean - base.mean) / base.mean
    return ScenarioResult(
        region=region,
        points=points,
        baseline=base.safety,
        scenario=after.safety,
        mean_baseline=base.mean,
        mean_scenario=after.mean,
        relative_change=rel,
        edit_reports=reports,
    )


def render_percent(relative_change: float) -> str:
    """Human-readable percent, rounded half away from zero: 0.2593 -> '26%'."""
    scaled = relative_change * 100.0
    magnitude = int(math.floor(abs(scaled) + 0.5))
    sign = "-" if scaled < 0 and magnitude > 0 else ""
    return f"{sign}{magnitude}%"


def result_to_json(result: ScenarioResult) -> str:
    doc = {
        "mean_baseline": result.mean_baseline,
        "mean_scenario": result.mean_scenario,
        "relative_change": result.relative_change,
        "relative_change_text": render_percent(result.relative_change),
        "n_points": len(result.points),
        "edits": [
            {
                "attribute": r.attribute,
                "matched": r.matched,
                "changed": r.changed,
                "warning": r.warning,
            }
            for r in result.edit_reports
        ],
    }
    return json.dumps(doc, indent=1)


def result_to_geojson(result: ScenarioResult) -> dict:
    """Per-point safety deltas as a GeoJSON FeatureCollection."""
    features = []
    for i, sp in enumerate(result.points):
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [sp.point[0], sp.point[1]]},
                "properties": {
                    "edge_id": sp.edge_id,
                    "offset_m": sp.offset_m,
                    "baseline_safety": float(result.baseline[i]),
                    "scenario_safety": float(result.scenario[i]),
                    "delta": float(result.scenario[i] - result.baseline[i]),
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}
